#include "sigma/moderator.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "sigma/protocol.hpp"

namespace sigma::moderator {

const PriorityScheme& PriorityScheme::validate() const {
    std::set<AgentRole> seen(order.begin(), order.end());
    if (order.size() != kAllRoles.size() || seen.size() != kAllRoles.size()) {
        throw Error(ErrorKind::MissingRole,
                    "priority scheme must order each of the four roles exactly once");
    }
    return *this;
}

int PriorityScheme::rank_of(AgentRole role) const {
    for (size_t i = 0; i < order.size(); ++i) {
        if (order[i] == role) return static_cast<int>(i);
    }
    throw Error(ErrorKind::MissingRole,
                std::string("role ") + to_string(role) + " missing from priority scheme");
}

std::string normalize_proposition(std::string_view raw) {
    std::string s = protocol::lower_ascii(protocol::collapse_whitespace(protocol::trim(raw)));
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' ||
                          s.back() == ';' || s.back() == ':' || s.back() == ',')) {
        s.pop_back();
    }
    return protocol::trim(s);
}

namespace {

int term_count(const std::string& s) {
    std::istringstream words(s);
    std::string w;
    int n = 0;
    while (words >> w) ++n;
    return n;
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        current.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            const bool at_end = i + 1 >= text.size();
            const bool before_ws =
                !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
            if (at_end || before_ws) {
                out.push_back(current);
                current.clear();
            }
        }
    }
    if (!protocol::trim(current).empty()) out.push_back(current);
    return out;
}

std::set<std::string> alnum_terms(const std::string& text) {
    std::set<std::string> terms;
    std::string term;
    for (char raw : protocol::lower_ascii(text)) {
        if (std::isalnum(static_cast<unsigned char>(raw))) {
            term.push_back(raw);
        } else if (!term.empty()) {
            terms.insert(term);
            term.clear();
        }
    }
    if (!term.empty()) terms.insert(term);
    return terms;
}

// A claim cites the results when they share at least three distinct terms.
bool cites(const std::set<std::string>& claim_terms,
           const std::set<std::string>& results_terms) {
    int shared = 0;
    for (const auto& t : claim_terms) {
        if (results_terms.count(t) && ++shared >= 3) return true;
    }
    return false;
}

const Segment* last_generated_segment(const AgentState& state) {
    for (auto it = state.transcript.rbegin(); it != state.transcript.rend(); ++it) {
        if (it->kind == SegmentKind::Reasoning || it->kind == SegmentKind::SearchQuery ||
            it->kind == SegmentKind::Conclusion) {
            return &*it;
        }
    }
    return nullptr;
}

} // namespace

std::vector<Proposition> extract_propositions(const AgentConclusion& conclusion,
                                              const AgentState& state) {
    std::vector<Proposition> props;
    std::string results_text;
    for (const Segment& seg : state.transcript) {
        if (seg.kind == SegmentKind::SearchResults) {
            results_text += seg.text;
            results_text += '\n';
        }
    }
    const bool searched = !results_text.empty();
    const std::set<std::string> results_terms = alnum_terms(results_text);

    for (const std::string& sentence : split_sentences(conclusion.raw_text)) {
        const std::string normalized = normalize_proposition(sentence);
        if (normalized.empty() || term_count(normalized) < 3) continue;
        Verification verification = Verification::Speculative;
        if (searched && cites(alnum_terms(normalized), results_terms)) {
            verification = Verification::Verified;
        }
        if (conclusion.answer &&
            normalized.find(*conclusion.answer) != std::string::npos) {
            verification = Verification::Verified; // carries the final answer
        }
        props.push_back(Proposition{normalized, conclusion.role, verification});
    }
    return props;
}

AgentConclusion conclude(const AgentState& state) {
    AgentConclusion conclusion;
    conclusion.role = state.role;
    if (const Segment* last = last_generated_segment(state)) {
        conclusion.raw_text = last->text;
    }
    conclusion.answer = protocol::extract_answer(conclusion.raw_text);
    conclusion.propositions = extract_propositions(conclusion, state);
    return conclusion;
}

std::vector<Proposition> deduplicate(const std::vector<Proposition>& props) {
    std::vector<Proposition> out;
    std::set<std::string> seen;
    for (const Proposition& p : props) {
        if (seen.insert(p.text).second) out.push_back(p);
    }
    return out;
}

Resolution resolve_answer(const std::map<AgentRole, AgentConclusion>& conclusions,
                          const PriorityScheme& scheme) {
    scheme.validate();

    struct Group {
        std::string answer;
        std::vector<AgentRole> supporters; // priority order
        int best_rank = 1 << 20;
    };
    std::vector<Group> groups;
    auto group_for = [&groups](const std::string& answer) -> Group& {
        for (Group& g : groups) {
            if (g.answer == answer) return g;
        }
        groups.push_back(Group{answer, {}, 1 << 20});
        return groups.back();
    };
    // Walk roles in priority order so supporter lists and group discovery
    // order never depend on map insertion order.
    for (AgentRole role : scheme.order) {
        const auto it = conclusions.find(role);
        if (it == conclusions.end() || !it->second.answer) continue; // abstains
        Group& g = group_for(*it->second.answer);
        g.supporters.push_back(role);
        g.best_rank = std::min(g.best_rank, scheme.rank_of(role));
    }
    if (groups.empty()) {
        throw Error(ErrorKind::NoAnswer, "every agent abstained or failed");
    }

    size_t winner = 0;
    for (size_t i = 1; i < groups.size(); ++i) {
        const Group& g = groups[i];
        const Group& w = groups[winner];
        if (scheme.majority_first) {
            if (g.supporters.size() > w.supporters.size() ||
                (g.supporters.size() == w.supporters.size() && g.best_rank < w.best_rank)) {
                winner = i;
            }
        } else if (g.best_rank < w.best_rank) {
            winner = i;
        }
    }

    Resolution res;
    res.answer = groups[winner].answer;
    res.supporting_roles = groups[winner].supporters;
    for (size_t i = 0; i < groups.size(); ++i) {
        if (i == winner) continue;
        std::string note = "rejected: ";
        note += scheme.majority_first ? "smaller group" : "lower priority than ";
        if (!scheme.majority_first) {
            note += to_string(scheme.order[static_cast<size_t>(groups[winner].best_rank)]);
        }
        res.resolution_log.push_back(
            ResolutionRecord{groups[i].answer, groups[i].supporters, note});
    }
    return res;
}

FinalAnswer synthesize(const Query& query,
                       const std::map<AgentRole, AgentState>& states,
                       const PriorityScheme& scheme) {
    scheme.validate();
    std::map<AgentRole, AgentConclusion> conclusions;
    for (const auto& [role, state] : states) {
        if (state.status == AgentStatus::Running) {
            throw Error(ErrorKind::ParseError,
                        std::string("agent ") + to_string(role) +
                            " is still running; moderation needs terminal states");
        }
        if (state.status == AgentStatus::Failed) continue;
        conclusions.emplace(role, conclude(state));
    }

    const Resolution resolution = resolve_answer(conclusions, scheme);

    // Collate propositions in priority order, then deduplicate.
    std::vector<Proposition> all;
    for (AgentRole role : scheme.order) {
        const auto it = conclusions.find(role);
        if (it == conclusions.end()) continue;
        all.insert(all.end(), it->second.propositions.begin(),
                   it->second.propositions.end());
    }
    const std::vector<Proposition> unique = deduplicate(all);

    std::ostringstream body;
    body << "Question: " << query.text << "\n";
    for (AgentRole role : scheme.order) {
        bool any = false;
        for (const Proposition& p : unique) {
            if (p.origin_role != role) continue;
            if (!any) {
                body << "\n" << to_string(role) << ":\n";
                any = true;
            }
            body << "- " << p.text << " ["
                 << (p.verification == Verification::Verified ? "verified" : "speculative")
                 << "]\n";
        }
    }
    body << "\nFinal answer: " << resolution.answer;

    FinalAnswer final_answer;
    final_answer.answer = resolution.answer;
    final_answer.supporting_roles = resolution.supporting_roles;
    final_answer.resolution_log = resolution.resolution_log;
    final_answer.justification = body.str();
    return final_answer;
}

} // namespace sigma::moderator
