#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigma/types.hpp"

namespace sigma::backends {

// ---------------------------------------------------------------------------
// Interfaces
// ---------------------------------------------------------------------------

struct GenerationRequest {
    std::string prompt;
    std::vector<std::string> stop_sequences;
    int max_tokens = 1024;
    double temperature = 0.0;
    std::int64_t seed = 42;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string generate(const GenerationRequest& req) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual std::vector<Chunk> search(const std::string& query, int max_results) = 0;
};

/// The triple the runtime consumes. All implementations must tolerate
/// concurrent calls from the four agent workers.
struct BackendSet {
    std::shared_ptr<ModelBackend> model;
    std::shared_ptr<EmbeddingBackend> embedder;
    std::shared_ptr<SearchBackend> search;
};

// ---------------------------------------------------------------------------
// Prompt header
//
// The runtime prepends one machine-readable line to every outgoing prompt so
// playbook-driven backends can key on (role, step) without parsing the
// transcript. It is never part of the transcript itself.
// ---------------------------------------------------------------------------

struct PromptKey {
    AgentRole role = AgentRole::Factual;
    int step = 0;
    bool hypothetical = false;
    int ordinal = 0; // search ordinal, hypothetical prompts only
};

std::string prompt_header(AgentRole role, int step);
std::string hypo_prompt_header(AgentRole role, int ordinal);
std::optional<PromptKey> parse_prompt_header(std::string_view prompt);

// ---------------------------------------------------------------------------
// Scripted model (offline test double)
// ---------------------------------------------------------------------------

/// Total map from (role, step) to a fixed generation; the default covers all
/// unmapped keys. Hypothetical-passage calls are keyed by (role, search
/// ordinal) with their own default; an empty string there makes the retrieval
/// pipeline fall back to the raw sub-query.
struct ScriptedPlaybook {
    std::map<std::pair<AgentRole, int>, std::string> entries;
    std::map<std::pair<AgentRole, int>, std::string> hypo_entries;
    std::string default_text = "Continuing to reason about the problem.";
    std::string hypo_default;
};

class ScriptedModelBackend : public ModelBackend {
public:
    explicit ScriptedModelBackend(ScriptedPlaybook playbook)
        : playbook_(std::move(playbook)) {}

    std::string generate(const GenerationRequest& req) override;

private:
    ScriptedPlaybook playbook_;
};

// ---------------------------------------------------------------------------
// Hash embedder (offline default)
// ---------------------------------------------------------------------------

/// Deterministic bag-of-terms embedder: lowercase, split on non-alphanumerics,
/// FNV-1a each term into one of `dim` buckets, count, L2-normalize. A text
/// with no tokens embeds as a fixed unit basis vector (with a warning on
/// stderr) so downstream cosine math stays defined.
class HashEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(int dim = 256);

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }

    static std::uint64_t fnv1a64(std::string_view term);

private:
    int dim_;
};

/// Memoizes an inner embedder by exact text. Thread-safe; hypothetical
/// passages and repeated chunks are embedded once per run.
class CachingEmbedder : public EmbeddingBackend {
public:
    explicit CachingEmbedder(std::shared_ptr<EmbeddingBackend> inner);
    ~CachingEmbedder() override;

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    int dimension() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Local corpus search
// ---------------------------------------------------------------------------

/// Line-delimited records {doc_id, text}. Scoring is case-insensitive overlap
/// of distinct whitespace-delimited terms, ties broken by corpus order; a
/// deliberately simple first stage, reranking does the precision work.
class LocalCorpusSearchBackend : public SearchBackend {
public:
    explicit LocalCorpusSearchBackend(const std::string& corpus_path);
    explicit LocalCorpusSearchBackend(std::vector<Chunk> docs);

    std::vector<Chunk> search(const std::string& query, int max_results) override;

    size_t size() const { return docs_.size(); }

private:
    std::vector<Chunk> docs_;
    std::vector<std::vector<std::string>> doc_terms_; // sorted distinct terms
};

// ---------------------------------------------------------------------------
// HTTP backends
// ---------------------------------------------------------------------------

/// Chat-completions style client. Request body fields: model, messages, stop,
/// temperature, seed, max_tokens; the first choice's text is returned.
/// Failures surface as Error{BackendError} naming the retry count and cause;
/// transport detail never leaks upward.
std::shared_ptr<ModelBackend> make_http_model(const HttpEndpoint& endpoint,
                                              int retries, int backoff_ms);

/// POST {inputs: [string]} -> {vectors: [[real]]}; dimension fixed per run.
std::shared_ptr<EmbeddingBackend> make_http_embedder(const HttpEndpoint& endpoint,
                                                     int dimension, int retries,
                                                     int backoff_ms);

/// POST {query, max_results} -> {results: [{doc_id, text}]}.
std::shared_ptr<SearchBackend> make_http_search(const HttpEndpoint& endpoint,
                                                int retries, int backoff_ms);

} // namespace sigma::backends
