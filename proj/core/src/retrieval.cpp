#include "sigma/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigma/protocol.hpp"

namespace sigma::retrieval {

std::string hypo_prompt(const Query& query, const AgentState& state,
                        const SearchRequest& request) {
    std::string persona;
    if (!state.transcript.empty() &&
        state.transcript.front().kind == SegmentKind::Instruction) {
        persona = state.transcript.front().text;
    }
    std::string prompt = backends::hypo_prompt_header(request.agent_role, request.ordinal);
    prompt += persona;
    prompt += "\n\nOriginal problem:\n";
    prompt += query.text;
    prompt += "\n\nCurrent search query:\n";
    prompt += request.query_text;
    prompt += "\n\nWrite the single ideal passage that would fully answer this "
              "search query. Respond with the passage only.";
    return prompt;
}

HypotheticalPassage hypo_generate(const Query& query, const AgentState& state,
                                  const SearchRequest& request,
                                  backends::ModelBackend& model,
                                  const DecodingParams& decoding) {
    backends::GenerationRequest req;
    req.prompt = hypo_prompt(query, state, request);
    req.max_tokens = decoding.max_tokens;
    req.temperature = decoding.temperature;
    req.seed = decoding.seed;
    std::string text = protocol::trim(model.generate(req));
    if (text.empty()) text = request.query_text;
    return HypotheticalPassage{std::move(text), request.agent_role, request.ordinal};
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "cosine over vectors of dimension " +
                        std::to_string(a.dimension()) + " and " +
                        std::to_string(b.dimension()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw Error(ErrorKind::ZeroVector, "cosine is undefined for a zero vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<RankedChunk> rank_and_select(const HypotheticalPassage& passage,
                                         const std::vector<Chunk>& candidates,
                                         int k,
                                         backends::EmbeddingBackend& embedder) {
    if (k < 1) throw Error(ErrorKind::InvalidBudget, "rank_and_select needs k >= 1");
    if (candidates.empty()) return {};

    const EmbeddingVector anchor =
        embedder.embed_batch({passage.text}).front();
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const Chunk& c : candidates) texts.push_back(c.text);
    const std::vector<EmbeddingVector> vectors = embedder.embed_batch(texts);

    std::vector<RankedChunk> ranked;
    ranked.reserve(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        ranked.push_back({candidates[i], cosine_similarity(anchor, vectors[i])});
    }
    // stable: equal similarities keep retrieval order
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedChunk& x, const RankedChunk& y) {
                         return x.similarity > y.similarity;
                     });
    if (ranked.size() > static_cast<size_t>(k)) ranked.resize(static_cast<size_t>(k));
    return ranked;
}

std::vector<Chunk> search(const SearchRequest& request,
                          backends::SearchBackend& backend, int candidate_pool) {
    if (protocol::trim(request.query_text).empty()) {
        throw Error(ErrorKind::ParseError, "search request with empty query text");
    }
    return backend.search(request.query_text, candidate_pool);
}

} // namespace sigma::retrieval
