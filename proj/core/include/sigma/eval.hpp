#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sigma/backends.hpp"
#include "sigma/moderator.hpp"
#include "sigma/runtime.hpp"
#include "sigma/trace.hpp"
#include "sigma/types.hpp"

namespace sigma::eval {

struct DatasetRecord {
    std::string id;
    std::string question;
    std::string gold_answer;
    std::vector<std::string> choices; // empty for free-form answers
    std::string subject;
    int line_no = 0;

    bool operator==(const DatasetRecord&) const = default;
};

/// Line-delimited JSON records {id, question, answer, choices?, subject?}.
/// Errors carry the offending line number; ids must be unique and a gold
/// answer must appear among its choices when choices are given.
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Exact match after answer normalization. Values that both parse as integers
/// or simple fractions compare as exact rationals ("007" == "7", "2/4" ==
/// "1/2"); no decimal-fraction unification ("1/2" != "0.5"). With choices,
/// the predicted answer may also name the gold choice's letter.
bool score_answer(const std::string& predicted, const std::string& gold,
                  const std::vector<std::string>& choices = {});

/// One full pipeline pass: four agents, then moderation, with the complete
/// event trace stitched in fixed role order so deterministic backends yield
/// byte-identical normalized traces.
struct SolveResult {
    std::optional<FinalAnswer> final;
    std::map<AgentRole, AgentState> states;
    std::vector<trace::TraceEvent> events;
    std::string error; // set when final is empty
};

SolveResult solve_query(const Query& q, const RunConfig& cfg,
                        const backends::BackendSet& b);

struct RecordResult {
    std::string id;
    std::string final_answer; // empty when the run produced none
    bool correct = false;
    std::string error;
    double wall_ms = 0.0;
    std::map<AgentRole, AgentStatus> statuses;
    std::map<AgentRole, int> searches_used;
    std::map<AgentRole, int> steps;
};

struct RunReport {
    std::vector<RecordResult> records; // dataset order
    int correct_count = 0;
    double pass_at_1 = 0.0;
    double mean_searches = 0.0; // executed searches per record, all roles
    std::map<AgentStatus, int> status_counts;
};

/// Runs every record (up to cfg.parallelism at a time), writes one trace file
/// per record into trace_dir when non-empty, and aggregates independent of
/// completion order. Per-record failures score as incorrect; the sweep never
/// aborts on them.
RunReport run_eval(const std::vector<DatasetRecord>& dataset, const RunConfig& cfg,
                   const backends::BackendSet& b, const std::string& trace_dir = "");

nlohmann::json report_to_json(const RunReport& report);
void write_report(const RunReport& report, const std::string& path);

} // namespace sigma::eval
