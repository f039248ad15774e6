#include "sigma/eval.hpp"

#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "sigma/error.hpp"
#include "sigma/protocol.hpp"

namespace sigma::eval {

using nlohmann::json;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct Rational {
    long long num = 0;
    long long den = 1;
};

/// Accepts -?digits or -?digits/digits with at most 18 digits per component,
/// so cross-multiplication below stays within __int128.
std::optional<Rational> parse_rational(const std::string& s) {
    if (s.empty()) return std::nullopt;
    size_t pos = 0;
    bool negative = false;
    if (s[pos] == '-') {
        negative = true;
        ++pos;
    }
    auto read_component = [&](long long& out) -> bool {
        size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        size_t len = pos - start;
        if (len == 0 || len > 18) return false;
        auto res = std::from_chars(s.data() + start, s.data() + pos, out);
        return res.ec == std::errc();
    };
    Rational r;
    if (!read_component(r.num)) return std::nullopt;
    if (pos < s.size()) {
        if (s[pos] != '/') return std::nullopt;
        ++pos;
        if (!read_component(r.den)) return std::nullopt;
        if (pos != s.size()) return std::nullopt;
        if (r.den == 0) return std::nullopt;
    }
    if (negative) r.num = -r.num;
    return r;
}

bool rationals_equal(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

std::string sanitize_filename(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

} // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open dataset: " + path);

    std::vector<DatasetRecord> records;
    std::map<std::string, int> seen; // id -> line
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (protocol::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::ParseError,
                        path + " line " + std::to_string(line_no) + ": " + ex.what());
        }
        auto fail = [&](const std::string& why) -> Error {
            return Error(ErrorKind::ParseError,
                         path + " line " + std::to_string(line_no) + ": " + why);
        };
        if (!j.is_object()) throw fail("record is not an object");

        DatasetRecord rec;
        rec.line_no = line_no;
        if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
            throw fail("missing or empty string field 'id'");
        rec.id = j["id"].get<std::string>();
        if (!j.contains("question") || !j["question"].is_string() ||
            j["question"].get<std::string>().empty())
            throw fail("missing or empty string field 'question'");
        rec.question = j["question"].get<std::string>();
        if (!j.contains("answer") || !j["answer"].is_string() ||
            j["answer"].get<std::string>().empty())
            throw fail("missing or empty string field 'answer'");
        rec.gold_answer = j["answer"].get<std::string>();
        if (j.contains("choices")) {
            if (!j["choices"].is_array() || j["choices"].empty())
                throw fail("'choices' must be a non-empty array");
            for (const json& c : j["choices"]) {
                if (!c.is_string()) throw fail("'choices' entries must be strings");
                rec.choices.push_back(c.get<std::string>());
            }
            bool found = false;
            for (const std::string& c : rec.choices)
                if (c == rec.gold_answer) found = true;
            if (!found) throw fail("answer '" + rec.gold_answer + "' not among choices");
        }
        if (j.contains("subject")) {
            if (!j["subject"].is_string()) throw fail("'subject' must be a string");
            rec.subject = j["subject"].get<std::string>();
        }

        auto [it, inserted] = seen.emplace(rec.id, line_no);
        if (!inserted)
            throw Error(ErrorKind::DuplicateId,
                        "duplicate id '" + rec.id + "' at " + path + " line " +
                            std::to_string(line_no) + " (first seen line " +
                            std::to_string(it->second) + ")");
        records.push_back(std::move(rec));
    }
    return records;
}

bool score_answer(const std::string& predicted, const std::string& gold,
                  const std::vector<std::string>& choices) {
    const std::string np = protocol::normalize_answer(predicted);
    const std::string ng = protocol::normalize_answer(gold);

    if (!choices.empty()) {
        for (size_t i = 0; i < choices.size(); ++i) {
            if (choices[i] != gold) continue;
            if (i < 26 && np == std::string(1, static_cast<char>('a' + i))) return true;
            break;
        }
    }

    auto rp = parse_rational(np);
    auto rg = parse_rational(ng);
    if (rp && rg) return rationals_equal(*rp, *rg);
    return np == ng;
}

SolveResult solve_query(const Query& q, const RunConfig& cfg,
                        const backends::BackendSet& b) {
    validate_config(cfg);
    SolveResult res;

    trace::TraceEvent start;
    start.kind = trace::EventKind::RunStart;
    start.ts_ms = now_ms();
    json instructions = json::object();
    for (AgentRole role : kAllRoles)
        instructions[to_string(role)] = cfg.instruction_for(role).prompt_text;
    start.payload = json{
        {"query", {{"id", q.id}, {"text", q.text}}},
        {"instructions", std::move(instructions)},
        {"config",
         {{"max_searches", cfg.max_searches},
          {"max_steps", cfg.max_steps},
          {"top_k", cfg.top_k}}},
    };
    res.events.push_back(std::move(start));

    auto finish = [&](const std::optional<std::string>& answer) {
        trace::TraceEvent end;
        end.kind = trace::EventKind::RunEnd;
        end.ts_ms = now_ms();
        end.payload = json{{"final_answer", answer ? json(*answer) : json(nullptr)}};
        if (!res.error.empty()) end.payload["error"] = res.error;
        res.events.push_back(std::move(end));
        if (cfg.normalized_trace)
            for (trace::TraceEvent& ev : res.events) ev.ts_ms = 0;
    };

    std::map<AgentRole, runtime::AgentRunResult> agent_results;
    try {
        agent_results = runtime::run_all_agents(q, cfg, b);
    } catch (const Error& err) {
        res.error = err.what();
        finish(std::nullopt);
        return res;
    }

    for (AgentRole role : kAllRoles) {
        runtime::AgentRunResult& ar = agent_results.at(role);
        for (trace::TraceEvent& ev : ar.events) res.events.push_back(std::move(ev));
        res.states.emplace(role, std::move(ar.state));
    }

    try {
        moderator::PriorityScheme scheme;
        scheme.order = cfg.priority;
        scheme.majority_first = cfg.majority_first;
        FinalAnswer final = moderator::synthesize(q, res.states, scheme);

        trace::TraceEvent decision;
        decision.kind = trace::EventKind::ModeratorDecision;
        decision.ts_ms = now_ms();
        json supporters = json::array();
        for (AgentRole role : final.supporting_roles) supporters.push_back(to_string(role));
        json log = json::array();
        for (const ResolutionRecord& rr : final.resolution_log) {
            json entry{{"answer", rr.answer}, {"note", rr.note}};
            json rs = json::array();
            for (AgentRole role : rr.supporters) rs.push_back(to_string(role));
            entry["supporters"] = std::move(rs);
            log.push_back(std::move(entry));
        }
        decision.payload = json{
            {"answer", final.answer},
            {"supporting_roles", std::move(supporters)},
            {"log", std::move(log)},
            {"justification", final.justification},
        };
        res.events.push_back(std::move(decision));

        res.final = std::move(final);
        finish(res.final->answer);
    } catch (const Error& err) {
        res.error = err.what();
        finish(std::nullopt);
    }
    return res;
}

RunReport run_eval(const std::vector<DatasetRecord>& dataset, const RunConfig& cfg,
                   const backends::BackendSet& b, const std::string& trace_dir) {
    validate_config(cfg);
    if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no records");
    if (!trace_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(trace_dir, ec);
        if (ec)
            throw Error(ErrorKind::IoError,
                        "cannot create trace directory " + trace_dir + ": " + ec.message());
    }

    RunReport report;
    report.records.resize(dataset.size());

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < dataset.size(); i = next.fetch_add(1)) {
            const DatasetRecord& rec = dataset[i];
            RecordResult r;
            r.id = rec.id;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Query q;
                q.id = rec.id;
                q.text = rec.question;
                q.gold_answer = rec.gold_answer;
                SolveResult s = solve_query(q, cfg, b);
                for (const auto& [role, state] : s.states) {
                    r.statuses[role] = state.status;
                    r.searches_used[role] =
                        count_segments(state.transcript, SegmentKind::SearchResults);
                    r.steps[role] = state.step;
                }
                if (s.final) {
                    r.final_answer = s.final->answer;
                    r.correct = score_answer(r.final_answer, rec.gold_answer, rec.choices);
                } else {
                    r.error = s.error;
                }
                if (!trace_dir.empty())
                    trace::write_trace(s.events, trace_dir + "/" +
                                                     sanitize_filename(rec.id) +
                                                     ".trace.jsonl");
            } catch (const std::exception& ex) {
                r.error = ex.what();
                r.correct = false;
            }
            const auto t1 = std::chrono::steady_clock::now();
            r.wall_ms = cfg.normalized_trace
                            ? 0.0
                            : std::chrono::duration<double, std::milli>(t1 - t0).count();
            report.records[i] = std::move(r);
        }
    };

    const size_t workers =
        std::min(static_cast<size_t>(std::max(cfg.parallelism, 1)), dataset.size());
    std::vector<std::thread> threads;
    for (size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
    worker();
    for (std::thread& t : threads) t.join();

    long long total_searches = 0;
    for (const RecordResult& r : report.records) {
        if (r.correct) ++report.correct_count;
        for (const auto& [role, n] : r.searches_used) total_searches += n;
        for (const auto& [role, status] : r.statuses) ++report.status_counts[status];
    }
    const double n = static_cast<double>(report.records.size());
    report.pass_at_1 = static_cast<double>(report.correct_count) / n;
    report.mean_searches = static_cast<double>(total_searches) / n;
    return report;
}

json report_to_json(const RunReport& report) {
    json records = json::array();
    for (const RecordResult& r : report.records) {
        json agents = json::object();
        for (const auto& [role, status] : r.statuses) {
            json entry{{"status", to_string(status)}};
            auto s_it = r.searches_used.find(role);
            entry["searches"] = s_it != r.searches_used.end() ? s_it->second : 0;
            auto p_it = r.steps.find(role);
            entry["steps"] = p_it != r.steps.end() ? p_it->second : 0;
            agents[to_string(role)] = std::move(entry);
        }
        json rec{
            {"id", r.id},
            {"final_answer", r.final_answer},
            {"correct", r.correct},
            {"wall_ms", r.wall_ms},
            {"agents", std::move(agents)},
        };
        if (!r.error.empty()) rec["error"] = r.error;
        records.push_back(std::move(rec));
    }
    json counts = json::object();
    for (const auto& [status, n] : report.status_counts) counts[to_string(status)] = n;
    return json{
        {"aggregate",
         {{"records", report.records.size()},
          {"correct", report.correct_count},
          {"pass_at_1", report.pass_at_1},
          {"mean_searches", report.mean_searches},
          {"status_counts", std::move(counts)}}},
        {"records", std::move(records)},
    };
}

void write_report(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open report file for writing: " + path);
    out << report_to_json(report).dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing report file: " + path);
}

} // namespace sigma::eval
