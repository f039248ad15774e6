#pragma once

#include <map>
#include <string>
#include <vector>

#include "sigma/types.hpp"

namespace sigma::moderator {

/// Total order over the four roles, highest priority first.
struct PriorityScheme {
    std::vector<AgentRole> order = {AgentRole::Computational, AgentRole::Factual,
                                    AgentRole::Logical, AgentRole::Completeness};
    /// When set, the largest answer group wins and priority only breaks ties.
    /// Off by default: priority strictly dominates majority.
    bool majority_first = false;

    const PriorityScheme& validate() const;
    int rank_of(AgentRole role) const; // 0 = highest
};

/// Proposition-level normalization: trim, collapse whitespace, lowercase,
/// strip terminal punctuation. Idempotent.
std::string normalize_proposition(std::string_view raw);

/// Derives a conclusion from a terminal state: raw_text is the last
/// model-generated segment, the answer is extracted from it, and propositions
/// are split out of it. Verification is mechanical: a claim is Verified when
/// it cites the agent's search results (>= 3 shared distinct terms with an
/// injected results block) or when it carries the agent's final answer.
AgentConclusion conclude(const AgentState& state);

/// Sentence-level split of the conclusion's final reasoning segment
/// ('.', '!', '?' followed by whitespace or end); fragments under three terms
/// are dropped; each survivor is normalized and tagged.
std::vector<Proposition> extract_propositions(const AgentConclusion& conclusion,
                                              const AgentState& state);

/// Removes propositions with identical normalized text, keeping the first
/// occurrence; inputs arrive pre-sorted by priority then per-agent order, so
/// the survivor is attributed to the highest-priority role. Stable.
std::vector<Proposition> deduplicate(const std::vector<Proposition>& props);

struct Resolution {
    std::string answer;
    std::vector<AgentRole> supporting_roles;
    std::vector<ResolutionRecord> resolution_log;
};

/// Groups agents by normalized answer and selects the group containing the
/// highest-priority role (or the largest group under majority_first); every
/// discarded alternative is logged. Abstaining agents are ignored. Throws
/// Error{NoAnswer} when all abstain.
Resolution resolve_answer(const std::map<AgentRole, AgentConclusion>& conclusions,
                          const PriorityScheme& scheme);

/// Full moderator pass: conclude each terminal agent, extract and deduplicate
/// propositions, resolve the answer, and assemble the fixed-template
/// justification. Pure function of its inputs; no model call.
FinalAnswer synthesize(const Query& query,
                       const std::map<AgentRole, AgentState>& states,
                       const PriorityScheme& scheme);

} // namespace sigma::moderator
