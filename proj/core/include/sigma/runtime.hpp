#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigma/backends.hpp"
#include "sigma/trace.hpp"
#include "sigma/types.hpp"

namespace sigma::runtime {

/// Injected as a Reasoning segment when the model requests a search after the
/// budget is spent. The attempt is recorded rather than silently dropped so
/// the model can adapt on the next step.
inline constexpr std::string_view kBudgetExhaustedNotice =
    "Search budget exhausted. The requested search was not executed; continue "
    "with the information already gathered.";

struct SearchOutcome {
    SearchRequest request;
    std::vector<RankedChunk> results;
    bool executed = false;
};

struct StepOutcome {
    ActionKind action = ActionKind::Reason;
    std::string generated_text;
    std::optional<SearchOutcome> search; // present iff action == Search
};

/// Header line the backends key on, then every transcript segment's text
/// joined by blank lines. The header is never stored in the transcript.
std::string render_prompt(const AgentState& state);

AgentState init_state(const AgentInstruction& instruction, const Query& q,
                      const RunConfig& cfg);

/// Search wins over an embedded answer (the injected results may change it);
/// a search span whose trimmed payload is empty is not a well-formed request
/// and falls through to the other two kinds.
ActionKind classify_action(const std::string& generated);

/// One generate-update cycle: generate, classify, append the new segments,
/// execute or deny the search, bump the step counter. `next_ordinal` is the
/// ordinal to assign if this step issues a search (denied attempts consume
/// ordinals too, keeping them strictly increasing). Throws on backend
/// failure; anything appended before the failure stays in the transcript and
/// the step counter is left untouched.
StepOutcome step_agent(AgentState& state, int next_ordinal,
                       const backends::BackendSet& b, const RunConfig& cfg);

struct AgentRunResult {
    AgentState state;
    std::vector<trace::TraceEvent> events;
};

/// Drives one agent to a terminal status. Backend failures (after the
/// backends' own retries) mark the agent Failed and preserve the partial
/// transcript; they do not propagate.
AgentRunResult run_agent(AgentState state, const backends::BackendSet& b,
                         const RunConfig& cfg);

/// Runs the four agents with no shared mutable state, one worker each.
/// Throws Error{AllAgentsFailed} only when every agent ends Failed.
std::map<AgentRole, AgentRunResult> run_all_agents(const Query& q,
                                                   const RunConfig& cfg,
                                                   const backends::BackendSet& b);

} // namespace sigma::runtime
