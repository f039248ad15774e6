#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sigma/types.hpp"

namespace sigma::trace {

enum class EventKind {
    RunStart,
    AgentStep,
    SearchIssued,
    ResultsInjected,
    AgentTerminal,
    ModeratorDecision,
    RunEnd,
};

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

/// One line of the trace. Payload layouts per kind are produced by the
/// runtime/harness and consumed by replay; object keys serialize sorted, so a
/// normalized trace (zeroed timestamps) is byte-stable.
struct TraceEvent {
    EventKind kind = EventKind::RunStart;
    std::int64_t ts_ms = 0;
    std::optional<AgentRole> role;
    int step = 0;
    nlohmann::json payload;

    bool operator==(const TraceEvent&) const = default;
};

TraceEvent agent_step_event(AgentRole role, int step, ActionKind action,
                            const std::vector<Segment>& appended);

std::string serialize_event(const TraceEvent& event);
TraceEvent parse_event(const std::string& line);

void write_trace(const std::vector<TraceEvent>& events, const std::string& path);
std::vector<TraceEvent> read_trace(const std::string& path);

/// Transcripts reconstructed from a trace: the RunStart seed segments plus
/// every AgentStep's appended segments, per role. Digests from AgentTerminal
/// events are verified against the rebuilt transcripts.
struct ReplayedRun {
    Query query;
    std::map<AgentRole, std::vector<Segment>> transcripts;
    std::map<AgentRole, AgentStatus> statuses;
    std::optional<std::string> final_answer;
};

ReplayedRun replay(const std::vector<TraceEvent>& events);

} // namespace sigma::trace
