#pragma once

#include <string>
#include <vector>

#include "sigma/backends.hpp"
#include "sigma/types.hpp"

namespace sigma::retrieval {

/// Model-written text standing in for the ideal answer to a sub-query; the
/// retrieval anchor for reranking.
struct HypotheticalPassage {
    std::string text;
    AgentRole agent_role = AgentRole::Factual;
    int search_ordinal = 1;

    bool operator==(const HypotheticalPassage&) const = default;
};

/// Builds the hypothetical-passage prompt from the agent persona, the original
/// query, and the current sub-query. Exposed so scripted fixtures and the
/// runtime agree byte-for-byte.
std::string hypo_prompt(const Query& query, const AgentState& state,
                        const SearchRequest& request);

/// Asks the model for a passage answering the sub-query; an empty generation
/// falls back to the sub-query text verbatim. Deterministic given a
/// deterministic backend.
HypotheticalPassage hypo_generate(const Query& query, const AgentState& state,
                                  const SearchRequest& request,
                                  backends::ModelBackend& model,
                                  const DecodingParams& decoding);

/// dot(a,b) / (|a| |b|), clamped to [-1, 1] to absorb rounding. Throws
/// Error{DimensionMismatch} or Error{ZeroVector}.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Embeds the passage once and each candidate once, then keeps the k most
/// similar chunks in descending order; ties preserve the candidates' retrieval
/// order. Returns fewer than k when candidates run short.
std::vector<RankedChunk> rank_and_select(const HypotheticalPassage& passage,
                                         const std::vector<Chunk>& candidates,
                                         int k, backends::EmbeddingBackend& embedder);

/// First-stage candidate fetch, up to `candidate_pool` chunks.
std::vector<Chunk> search(const SearchRequest& request,
                          backends::SearchBackend& backend, int candidate_pool);

} // namespace sigma::retrieval
