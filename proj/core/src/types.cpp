#include "sigma/types.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

namespace sigma {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingRole: return "MissingRole";
    case ErrorKind::InvalidBudget: return "InvalidBudget";
    case ErrorKind::InvalidDecoding: return "InvalidDecoding";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::NoAnswer: return "NoAnswer";
    case ErrorKind::AllAgentsFailed: return "AllAgentsFailed";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::IoError: return "IoError";
    }
    return "UnknownError";
}

const char* to_string(AgentRole role) {
    switch (role) {
    case AgentRole::Factual: return "Factual";
    case AgentRole::Logical: return "Logical";
    case AgentRole::Computational: return "Computational";
    case AgentRole::Completeness: return "Completeness";
    }
    return "Factual";
}

static std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

AgentRole role_from_string(const std::string& name) {
    const std::string n = lower_copy(name);
    if (n == "factual") return AgentRole::Factual;
    if (n == "logical") return AgentRole::Logical;
    if (n == "computational") return AgentRole::Computational;
    if (n == "completeness") return AgentRole::Completeness;
    throw Error(ErrorKind::ParseError, "unknown agent role '" + name + "'");
}

const char* to_string(SegmentKind kind) {
    switch (kind) {
    case SegmentKind::Instruction: return "Instruction";
    case SegmentKind::Query: return "Query";
    case SegmentKind::Reasoning: return "Reasoning";
    case SegmentKind::SearchQuery: return "SearchQuery";
    case SegmentKind::SearchResults: return "SearchResults";
    case SegmentKind::Conclusion: return "Conclusion";
    }
    return "Reasoning";
}

SegmentKind segment_kind_from_string(const std::string& name) {
    const std::string n = lower_copy(name);
    if (n == "instruction") return SegmentKind::Instruction;
    if (n == "query") return SegmentKind::Query;
    if (n == "reasoning") return SegmentKind::Reasoning;
    if (n == "searchquery") return SegmentKind::SearchQuery;
    if (n == "searchresults") return SegmentKind::SearchResults;
    if (n == "conclusion") return SegmentKind::Conclusion;
    throw Error(ErrorKind::ParseError, "unknown segment kind '" + name + "'");
}

const char* to_string(AgentStatus status) {
    switch (status) {
    case AgentStatus::Running: return "Running";
    case AgentStatus::Concluded: return "Concluded";
    case AgentStatus::BudgetExhausted: return "BudgetExhausted";
    case AgentStatus::StepLimitReached: return "StepLimitReached";
    case AgentStatus::Failed: return "Failed";
    }
    return "Running";
}

AgentStatus agent_status_from_string(const std::string& name) {
    const std::string n = lower_copy(name);
    if (n == "running") return AgentStatus::Running;
    if (n == "concluded") return AgentStatus::Concluded;
    if (n == "budgetexhausted") return AgentStatus::BudgetExhausted;
    if (n == "steplimitreached") return AgentStatus::StepLimitReached;
    if (n == "failed") return AgentStatus::Failed;
    throw Error(ErrorKind::ParseError, "unknown agent status '" + name + "'");
}

const char* to_string(ActionKind kind) {
    switch (kind) {
    case ActionKind::Search: return "Search";
    case ActionKind::Reason: return "Reason";
    case ActionKind::Synthesize: return "Synthesize";
    }
    return "Reason";
}

const char* to_string(ChunkSource source) {
    return source == ChunkSource::LocalCorpus ? "LocalCorpus" : "RemoteSearch";
}

const char* to_string(Verification verification) {
    return verification == Verification::Verified ? "Verified" : "Speculative";
}

int count_segments(const std::vector<Segment>& transcript, SegmentKind kind) {
    return static_cast<int>(std::count_if(
        transcript.begin(), transcript.end(),
        [kind](const Segment& s) { return s.kind == kind; }));
}

std::string transcript_digest(const std::vector<Segment>& transcript) {
    std::uint64_t h = 14695981039346656037ull; // FNV offset basis
    auto mix = [&h](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Segment& seg : transcript) {
        const unsigned char kind = static_cast<unsigned char>(seg.kind);
        const std::int32_t step = seg.step_index;
        mix(&kind, 1);
        mix(&step, sizeof step);
        mix(seg.text.data(), seg.text.size());
        const unsigned char sep = 0xff;
        mix(&sep, 1);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const AgentInstruction& RunConfig::instruction_for(AgentRole role) const {
    for (const auto& inst : instructions) {
        if (inst.role == role) return inst;
    }
    throw Error(ErrorKind::MissingRole,
                std::string("no instruction configured for role ") + to_string(role));
}

const RunConfig& validate_config(const RunConfig& cfg) {
    std::set<AgentRole> seen;
    for (const auto& inst : cfg.instructions) {
        if (inst.prompt_text.empty()) {
            throw Error(ErrorKind::MissingRole,
                        std::string("instructions.") + to_string(inst.role) +
                            ": empty prompt_text");
        }
        if (!seen.insert(inst.role).second) {
            throw Error(ErrorKind::MissingRole,
                        std::string("instructions.") + to_string(inst.role) +
                            ": role configured twice");
        }
    }
    for (AgentRole role : kAllRoles) {
        if (!seen.count(role)) {
            throw Error(ErrorKind::MissingRole,
                        std::string("instructions.") + to_string(role) + ": missing");
        }
    }
    if (cfg.max_searches < 0)
        throw Error(ErrorKind::InvalidBudget, "max_searches: must be >= 0");
    if (cfg.max_steps <= 0)
        throw Error(ErrorKind::InvalidBudget, "max_steps: must be >= 1");
    if (cfg.top_k < 1)
        throw Error(ErrorKind::InvalidBudget, "top_k: must be >= 1");
    if (cfg.candidate_pool < 1)
        throw Error(ErrorKind::InvalidBudget, "candidate_pool: must be >= 1");
    if (cfg.results_limit_chars < 1)
        throw Error(ErrorKind::InvalidBudget, "results_limit_chars: must be >= 1");
    if (cfg.parallelism < 1)
        throw Error(ErrorKind::InvalidBudget, "parallelism: must be >= 1");
    if (cfg.decoding.temperature < 0.0)
        throw Error(ErrorKind::InvalidDecoding, "decoding.temperature: must be >= 0");
    if (cfg.decoding.max_tokens <= 0)
        throw Error(ErrorKind::InvalidDecoding, "decoding.max_tokens: must be >= 1");

    std::set<AgentRole> prio(cfg.priority.begin(), cfg.priority.end());
    if (cfg.priority.size() != kAllRoles.size() || prio.size() != kAllRoles.size()) {
        throw Error(ErrorKind::MissingRole,
                    "priority: must list each of the four roles exactly once");
    }
    if (cfg.backends.retries < 0)
        throw Error(ErrorKind::InvalidBudget, "backends.retries: must be >= 0");
    return cfg;
}

} // namespace sigma
