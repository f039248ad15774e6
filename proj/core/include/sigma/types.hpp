#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigma/error.hpp"

namespace sigma {

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

enum class AgentRole { Factual, Logical, Computational, Completeness };

inline constexpr std::array<AgentRole, 4> kAllRoles = {
    AgentRole::Factual, AgentRole::Logical, AgentRole::Computational,
    AgentRole::Completeness};

const char* to_string(AgentRole role);
AgentRole role_from_string(const std::string& name); // accepts any case

// ---------------------------------------------------------------------------
// Query and transcript
// ---------------------------------------------------------------------------

struct Query {
    std::string id;
    std::string text;
    std::optional<std::string> gold_answer; // evaluation only

    bool operator==(const Query&) const = default;
};

struct AgentInstruction {
    AgentRole role = AgentRole::Factual;
    std::string prompt_text;

    bool operator==(const AgentInstruction&) const = default;
};

enum class SegmentKind {
    Instruction,
    Query,
    Reasoning,
    SearchQuery,
    SearchResults,
    Conclusion,
};

const char* to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(const std::string& name);

struct Segment {
    SegmentKind kind = SegmentKind::Reasoning;
    std::string text;
    int step_index = 0; // generate cycle that produced it; 0 for the seed segments

    bool operator==(const Segment&) const = default;
};

enum class AgentStatus {
    Running,
    Concluded,
    BudgetExhausted,
    StepLimitReached,
    Failed,
};

const char* to_string(AgentStatus status);
AgentStatus agent_status_from_string(const std::string& name);

/// Mutable only while its owning worker runs the reasoning loop.
struct AgentState {
    AgentRole role = AgentRole::Factual;
    std::vector<Segment> transcript;
    int step = 0;             // completed generate-update cycles
    int budget_remaining = 0; // searches still allowed
    AgentStatus status = AgentStatus::Running;

    bool operator==(const AgentState&) const = default;
};

int count_segments(const std::vector<Segment>& transcript, SegmentKind kind);

/// FNV-1a digest over (kind, text, step_index) per segment; used by trace
/// replay verification and the transcript-monotonicity checks.
std::string transcript_digest(const std::vector<Segment>& transcript);

// ---------------------------------------------------------------------------
// Actions and retrieval values
// ---------------------------------------------------------------------------

enum class ActionKind { Search, Reason, Synthesize };

const char* to_string(ActionKind kind);

struct SearchRequest {
    AgentRole agent_role = AgentRole::Factual;
    std::string query_text; // trimmed, non-empty
    int ordinal = 1;        // per-agent counter, strictly increasing

    bool operator==(const SearchRequest&) const = default;
};

enum class ChunkSource { LocalCorpus, RemoteSearch };

const char* to_string(ChunkSource source);

struct Chunk {
    std::string doc_id;
    std::string text;
    ChunkSource source = ChunkSource::LocalCorpus;

    bool operator==(const Chunk&) const = default;
};

struct RankedChunk {
    Chunk chunk;
    double similarity = 0.0; // cosine, in [-1, 1]

    bool operator==(const RankedChunk&) const = default;
};

/// Fixed-length real vector; one dimension per run. Zero vectors are rejected
/// (or substituted) at embed time, so downstream cosine math never sees them.
struct EmbeddingVector {
    std::vector<double> values;

    int dimension() const { return static_cast<int>(values.size()); }
    bool operator==(const EmbeddingVector&) const = default;
};

// ---------------------------------------------------------------------------
// Conclusions and synthesis
// ---------------------------------------------------------------------------

enum class Verification { Verified, Speculative };

const char* to_string(Verification verification);

struct Proposition {
    std::string text; // normalized claim
    AgentRole origin_role = AgentRole::Factual;
    Verification verification = Verification::Speculative;

    bool operator==(const Proposition&) const = default;
};

struct AgentConclusion {
    AgentRole role = AgentRole::Factual;
    std::string raw_text;              // final reasoning segment
    std::optional<std::string> answer; // normalized; absent = abstain
    std::vector<Proposition> propositions;

    bool operator==(const AgentConclusion&) const = default;
};

struct ResolutionRecord {
    std::string answer; // the rejected alternative
    std::vector<AgentRole> supporters;
    std::string note;

    bool operator==(const ResolutionRecord&) const = default;
};

struct FinalAnswer {
    std::string answer; // normalized
    std::vector<AgentRole> supporting_roles;
    std::vector<ResolutionRecord> resolution_log;
    std::string justification;

    bool operator==(const FinalAnswer&) const = default;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct DecodingParams {
    double temperature = 0.0;
    std::int64_t seed = 42;
    int max_tokens = 1024;
    std::vector<std::string> stop_sequences;

    bool operator==(const DecodingParams&) const = default;
};

struct HttpEndpoint {
    std::string base_url;   // e.g. http://127.0.0.1:8080
    std::string path;       // e.g. /v1/chat/completions
    std::string model_name; // model backends only
    int timeout_ms = 10000;
    std::string api_key_env; // env var holding the key; value never logged

    bool operator==(const HttpEndpoint&) const = default;
};

enum class BackendKind { Scripted, Http };

struct BackendSettings {
    BackendKind kind = BackendKind::Scripted;
    std::string playbook_path;   // scripted model
    std::string corpus_path;     // local-corpus search
    std::string embedding_kind = "hash"; // "hash" | "http"
    std::string search_kind = "local";   // "local" | "http"
    HttpEndpoint model{"", "/v1/chat/completions", "", 60000, "SIGMA_MODEL_API_KEY"};
    HttpEndpoint embedding{"", "/embed", "", 10000, "SIGMA_EMBED_API_KEY"};
    HttpEndpoint search{"", "/search", "", 10000, "SIGMA_SEARCH_API_KEY"};
    int retries = 2; // retries after the first attempt
    int retry_backoff_ms = 250;
    int embedding_dimension = 256;

    bool operator==(const BackendSettings&) const = default;
};

struct RunConfig {
    std::vector<AgentInstruction> instructions; // exactly the four roles
    int max_searches = 2;
    int max_steps = 16;
    int top_k = 3;
    int candidate_pool = 10;       // first-stage candidates before reranking
    int results_limit_chars = 4000; // payload cap per injected results block
    DecodingParams decoding;
    std::vector<AgentRole> priority = {AgentRole::Computational, AgentRole::Factual,
                                       AgentRole::Logical, AgentRole::Completeness};
    bool majority_first = false; // answer groups resolved by size before priority
    int parallelism = 1;         // eval record-level workers
    bool normalized_trace = false; // zero timestamps and wall times
    BackendSettings backends;

    bool operator==(const RunConfig&) const = default;

    const AgentInstruction& instruction_for(AgentRole role) const;
};

/// Returns cfg unchanged iff every invariant holds, else throws Error
/// (MissingRole, InvalidBudget, InvalidDecoding).
const RunConfig& validate_config(const RunConfig& cfg);

} // namespace sigma
