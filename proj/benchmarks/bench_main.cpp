#include <memory>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "sigma/backends.hpp"
#include "sigma/eval.hpp"
#include "sigma/protocol.hpp"
#include "sigma/retrieval.hpp"
#include "sigma/types.hpp"

namespace {

using namespace sigma;

std::string mixed_generation(int repeats) {
    std::string out;
    for (int i = 0; i < repeats; ++i) {
        out += "Some plain reasoning text about totients and factorizations. ";
        out += "<|begin_search_query|> lookup number " + std::to_string(i) +
               " <|end_search_query|> ";
        out += "<|begin_search_results|>\n[1] a result passage\n<|end_search_results|> ";
        out += "<|begin_search_query|> an unterminated opener ";
    }
    return out;
}

std::vector<std::string> sample_texts() {
    return {
        "euler totient function counts coprime integers",
        "prime factorization by trial division",
        "inclusion exclusion over prime divisors",
        "greatest common divisor and coprimality",
        "the count of residues coprime to the modulus",
        "2024 equals 2^3 times 11 times 23",
        "phi of 2024 equals 880",
        "cross validation by a second method",
    };
}

std::vector<Chunk> synthetic_corpus(int n) {
    const std::vector<std::string> texts = sample_texts();
    std::vector<Chunk> docs;
    docs.reserve(n);
    for (int i = 0; i < n; ++i)
        docs.push_back({"doc" + std::to_string(i),
                        texts[i % texts.size()] + " variant " + std::to_string(i),
                        ChunkSource::LocalCorpus});
    return docs;
}

RunConfig bench_config() {
    RunConfig cfg;
    cfg.instructions = {
        {AgentRole::Factual, "You verify facts."},
        {AgentRole::Logical, "You check logic."},
        {AgentRole::Computational, "You compute."},
        {AgentRole::Completeness, "You look for gaps."},
    };
    cfg.normalized_trace = true;
    cfg.candidate_pool = 10;
    cfg.top_k = 3;
    return cfg;
}

backends::ScriptedPlaybook bench_playbook() {
    backends::ScriptedPlaybook pb;
    for (AgentRole role : kAllRoles) {
        pb.entries[{role, 0}] =
            "Checking the factorization. <|begin_search_query|> prime factorization "
            "of 2024 <|end_search_query|>";
        pb.entries[{role, 1}] =
            "Checking the totient. <|begin_search_query|> totient of 2024 "
            "<|end_search_query|>";
        pb.entries[{role, 2}] = "The count is \\boxed{880}.";
        pb.hypo_entries[{role, 1}] = "2024 factors as 2^3 times 11 times 23.";
        pb.hypo_entries[{role, 2}] = "phi of 2024 equals 880 by the product formula.";
    }
    return pb;
}

void BM_ScanGeneration(benchmark::State& state) {
    const std::string text = mixed_generation(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(protocol::scan_generation(text));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ScanGeneration)->Arg(4)->Arg(64);

void BM_HashEmbedBatch(benchmark::State& state) {
    backends::HashEmbeddingBackend embedder(256);
    const std::vector<std::string> texts = sample_texts();
    for (auto _ : state) {
        benchmark::DoNotOptimize(embedder.embed_batch(texts));
    }
}
BENCHMARK(BM_HashEmbedBatch);

void BM_CosineSimilarity(benchmark::State& state) {
    backends::HashEmbeddingBackend embedder(256);
    const auto vecs = embedder.embed_batch(
        {"euler totient function counts coprime integers",
         "prime factorization by trial division and sieves"});
    for (auto _ : state) {
        benchmark::DoNotOptimize(retrieval::cosine_similarity(vecs[0], vecs[1]));
    }
}
BENCHMARK(BM_CosineSimilarity);

void BM_RankAndSelect(benchmark::State& state) {
    backends::HashEmbeddingBackend embedder(256);
    const std::vector<Chunk> candidates =
        synthetic_corpus(static_cast<int>(state.range(0)));
    retrieval::HypotheticalPassage passage;
    passage.text = "phi of 2024 equals 880 by the product formula";
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            retrieval::rank_and_select(passage, candidates, 5, embedder));
    }
}
BENCHMARK(BM_RankAndSelect)->Arg(10)->Arg(100);

void BM_SolveQuery(benchmark::State& state) {
    const RunConfig cfg = bench_config();
    backends::BackendSet b;
    b.model = std::make_shared<backends::ScriptedModelBackend>(bench_playbook());
    b.embedder = std::make_shared<backends::CachingEmbedder>(
        std::make_shared<backends::HashEmbeddingBackend>(256));
    b.search = std::make_shared<backends::LocalCorpusSearchBackend>(synthetic_corpus(40));
    const Query q{"bench", "How many integers up to 2024 are coprime to 2024?", {}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval::solve_query(q, cfg, b));
    }
}
BENCHMARK(BM_SolveQuery);

} // namespace

BENCHMARK_MAIN();
