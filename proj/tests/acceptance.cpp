#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "sigma/config_io.hpp"
#include "sigma/eval.hpp"
#include "sigma/moderator.hpp"
#include "sigma/protocol.hpp"
#include "sigma/retrieval.hpp"
#include "sigma/runtime.hpp"
#include "sigma/trace.hpp"

using namespace sigma;

namespace {

void ensure(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

std::string one_line(std::string text) {
    for (char& c : text)
        if (c == '\n' || c == '\r') c = ' ';
    if (text.size() > 200) text = text.substr(0, 200) + "...";
    return text;
}

Query totient_query() {
    return {"totient", "Find positive integers n <= 2024 such that gcd(n, 2024) = 1", {}};
}

std::string search_text(const std::string& payload) {
    return "<|begin_search_query|> " + payload + " <|end_search_query|>";
}

backends::BackendSet inline_backends(backends::ScriptedPlaybook playbook,
                                     std::vector<Chunk> docs) {
    backends::BackendSet b;
    b.model = std::make_shared<backends::ScriptedModelBackend>(std::move(playbook));
    b.embedder = std::make_shared<backends::CachingEmbedder>(
        std::make_shared<backends::HashEmbeddingBackend>(64));
    b.search = std::make_shared<backends::LocalCorpusSearchBackend>(std::move(docs));
    return b;
}

std::vector<Chunk> small_corpus() {
    return {
        {"c1", "prime factorization of integers by trial division", ChunkSource::LocalCorpus},
        {"c2", "euler totient counts coprime residues", ChunkSource::LocalCorpus},
        {"c3", "binary search over sorted arrays", ChunkSource::LocalCorpus},
    };
}

std::string serialize_trace(const std::vector<trace::TraceEvent>& events) {
    std::string out;
    for (const trace::TraceEvent& ev : events) out += trace::serialize_event(ev) + "\n";
    return out;
}

std::vector<trace::TraceEvent> zero_ts(std::vector<trace::TraceEvent> events) {
    for (trace::TraceEvent& ev : events) ev.ts_ms = 0;
    return events;
}

// --------------------------------------------------------------------------
// 1. One query end to end against the worked example.
// --------------------------------------------------------------------------

void golden_trace() {
    const RunConfig cfg =
        config::load_config(sigma::test::fixture_path("config_totient.json"));
    const Query q = totient_query();

    const eval::SolveResult one =
        eval::solve_query(q, cfg, config::make_backends(cfg.backends));
    const eval::SolveResult two =
        eval::solve_query(q, cfg, config::make_backends(cfg.backends));

    ensure(one.final.has_value(), "run produced no final answer");
    ensure(one.final->answer == "880",
           "final answer is '" + one.final->answer + "', want '880'");

    const std::map<AgentRole, std::vector<std::string>> want = {
        {AgentRole::Factual,
         {"Euler totient function definition", "prime factorization methods"}},
        {AgentRole::Computational,
         {"factor 2024 prime decomposition", "totient calculation methods"}},
        {AgentRole::Logical, {"relationship between coprimality and Euler's function"}},
        {AgentRole::Completeness,
         {"alternative calculation methods and cross-validation approaches"}},
    };
    std::map<AgentRole, std::vector<std::string>> got;
    for (const trace::TraceEvent& ev : one.events) {
        if (ev.kind != trace::EventKind::SearchIssued) continue;
        ensure(ev.payload.at("executed").get<bool>(), "a search was denied");
        got[*ev.role].push_back(ev.payload.at("query").get<std::string>());
    }
    ensure(got == want, "issued searches do not match the worked example");

    ensure(serialize_trace(one.events) == serialize_trace(two.events),
           "normalized traces differ between two runs");
}

// --------------------------------------------------------------------------
// 2. Budgets hold under randomized request patterns.
// --------------------------------------------------------------------------

void budget_safety() {
    std::mt19937 rng(20240816u);
    const std::array<int, 4> budgets = {0, 1, 2, 5};

    for (int t = 0; t < 1000; ++t) {
        const int requests = static_cast<int>(rng() % 11);
        const int budget = budgets[rng() % budgets.size()];
        const AgentRole role = kAllRoles[t % kAllRoles.size()];

        backends::ScriptedPlaybook pb;
        for (int s = 0; s < requests; ++s)
            pb.entries[{role, s}] =
                search_text("lookup " + std::to_string(t) + " " + std::to_string(s));
        pb.entries[{role, requests}] = "Done. \\boxed{1}";

        RunConfig cfg = sigma::test::base_config();
        cfg.max_searches = budget;
        cfg.max_steps = 12;
        cfg.candidate_pool = 3;
        cfg.top_k = 2;

        const backends::BackendSet b = inline_backends(std::move(pb), small_corpus());
        AgentState seed = runtime::init_state(cfg.instruction_for(role),
                                              Query{"b", "budget probe", {}}, cfg);
        const runtime::AgentRunResult res = runtime::run_agent(std::move(seed), b, cfg);

        ensure(res.state.status == AgentStatus::Concluded, "agent did not conclude");
        const int executed =
            count_segments(res.state.transcript, SegmentKind::SearchResults);
        ensure(executed == std::min(requests, budget),
               "executed " + std::to_string(executed) + " of " +
                   std::to_string(requests) + " requests under budget " +
                   std::to_string(budget));
        ensure(executed <= cfg.max_searches, "budget exceeded");

        int issued = 0;
        int issued_executed = 0;
        for (const trace::TraceEvent& ev : res.events) {
            if (ev.kind != trace::EventKind::SearchIssued) continue;
            ++issued;
            ensure(ev.payload.at("ordinal").get<int>() == issued,
                   "ordinals are not consecutive");
            if (ev.payload.at("executed").get<bool>()) ++issued_executed;
        }
        ensure(issued == requests, "every request must be recorded");
        ensure(issued_executed == executed, "event log disagrees with transcript");
    }
}

// --------------------------------------------------------------------------
// 3. Reranking matches a brute-force oracle.
// --------------------------------------------------------------------------

void reranking_oracle() {
    std::mt19937 rng(7321u);
    const std::vector<std::string> vocab = {
        "prime",  "factor",  "totient", "gcd",     "euler",  "count",
        "integer", "modulo", "sieve",   "divisor", "coprime", "residue"};
    auto random_text = [&](int max_terms) {
        const int n = 1 + static_cast<int>(rng() % max_terms);
        std::string out;
        for (int i = 0; i < n; ++i) {
            if (i > 0) out += ' ';
            out += vocab[rng() % vocab.size()];
        }
        return out;
    };

    backends::HashEmbeddingBackend embedder(64);
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + static_cast<int>(rng() % 100);
        const int k = 1 + static_cast<int>(rng() % 10);

        std::vector<Chunk> candidates;
        candidates.reserve(n);
        for (int i = 0; i < n; ++i)
            candidates.push_back(
                {"doc" + std::to_string(i), random_text(6), ChunkSource::LocalCorpus});

        retrieval::HypotheticalPassage passage;
        passage.text = random_text(8);

        const std::vector<RankedChunk> ranked =
            retrieval::rank_and_select(passage, candidates, k, embedder);

        const EmbeddingVector pv = embedder.embed_batch({passage.text})[0];
        std::vector<RankedChunk> oracle;
        oracle.reserve(n);
        for (const Chunk& c : candidates)
            oracle.push_back(
                {c, retrieval::cosine_similarity(pv, embedder.embed_batch({c.text})[0])});
        std::stable_sort(oracle.begin(), oracle.end(),
                         [](const RankedChunk& a, const RankedChunk& b) {
                             return a.similarity > b.similarity;
                         });
        oracle.resize(std::min<size_t>(k, oracle.size()));

        ensure(ranked.size() == oracle.size(), "selected count diverges from oracle");
        for (size_t i = 0; i < ranked.size(); ++i) {
            ensure(ranked[i].chunk.doc_id == oracle[i].chunk.doc_id,
                   "rank " + std::to_string(i) + " picked " + ranked[i].chunk.doc_id +
                       ", oracle wants " + oracle[i].chunk.doc_id);
            ensure(std::abs(ranked[i].similarity - oracle[i].similarity) <= 1e-9,
                   "similarity diverges from oracle");
        }
    }
}

// --------------------------------------------------------------------------
// 4. Cosine similarity behaves like a metric kernel.
// --------------------------------------------------------------------------

void cosine_properties() {
    std::mt19937 rng(31337u);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);

    auto random_vector = [&](int dim) {
        EmbeddingVector v;
        v.values.resize(dim);
        while (true) {
            double norm2 = 0.0;
            for (double& x : v.values) {
                x = coord(rng);
                norm2 += x * x;
            }
            if (norm2 > 1e-2) return v;
        }
    };

    for (int t = 0; t < 10000; ++t) {
        const int dim = 1 + static_cast<int>(rng() % 32);
        const EmbeddingVector a = random_vector(dim);
        const EmbeddingVector b = random_vector(dim);

        const double ab = retrieval::cosine_similarity(a, b);
        const double ba = retrieval::cosine_similarity(b, a);
        ensure(ab == ba, "cosine is not symmetric");
        ensure(ab >= -1.0 && ab <= 1.0, "cosine escapes [-1, 1]");

        EmbeddingVector a3 = a;
        for (double& x : a3.values) x *= 3.0;
        ensure(std::abs(retrieval::cosine_similarity(a3, b) - ab) <= 1e-12,
               "cosine is not scale invariant");

        const double self = retrieval::cosine_similarity(a, a);
        ensure(std::abs(self - 1.0) <= 1e-12 && self <= 1.0,
               "self-similarity is not one");
    }
}

// --------------------------------------------------------------------------
// 5. Moderation is deterministic and priority-dominant.
// --------------------------------------------------------------------------

void moderator_determinism() {
    std::mt19937 rng(4242u);
    const std::vector<std::string> answers = {"11", "22", "33", "44"};

    for (int t = 0; t < 500; ++t) {
        std::map<AgentRole, AgentConclusion> conclusions;
        int answerers = 0;
        for (AgentRole role : kAllRoles) {
            AgentConclusion c;
            c.role = role;
            if (rng() % 5 == 0) {
                c.raw_text = "No conclusion reached here.";
            } else {
                const std::string a = answers[rng() % answers.size()];
                c.raw_text = "The value comes out to " + a + ".";
                c.answer = a;
                ++answerers;
            }
            conclusions.emplace(role, std::move(c));
        }

        moderator::PriorityScheme scheme;
        std::shuffle(scheme.order.begin(), scheme.order.end(), rng);

        if (answerers == 0) {
            bool threw = false;
            try {
                moderator::resolve_answer(conclusions, scheme);
            } catch (const Error& err) {
                threw = err.kind() == ErrorKind::NoAnswer;
            }
            ensure(threw, "all-abstain must raise NoAnswer");
            continue;
        }

        const moderator::Resolution r1 = moderator::resolve_answer(conclusions, scheme);
        const moderator::Resolution r2 = moderator::resolve_answer(conclusions, scheme);
        ensure(r1.answer == r2.answer && r1.supporting_roles == r2.supporting_roles &&
                   r1.resolution_log == r2.resolution_log,
               "resolution is not deterministic");

        std::string expected;
        for (AgentRole role : scheme.order)
            if (conclusions.at(role).answer) {
                expected = *conclusions.at(role).answer;
                break;
            }
        ensure(r1.answer == expected, "top-priority answer lost");

        std::vector<AgentRole> expected_supporters;
        std::set<std::string> losing;
        for (AgentRole role : scheme.order) {
            const auto& c = conclusions.at(role);
            if (!c.answer) continue;
            if (*c.answer == expected)
                expected_supporters.push_back(role);
            else
                losing.insert(*c.answer);
        }
        ensure(r1.supporting_roles == expected_supporters,
               "supporters are not the winning group in priority order");
        ensure(r1.resolution_log.size() == losing.size(),
               "every losing group must be logged once");
    }

    std::vector<std::string> texts = {"alpha beta gamma", "delta epsilon zeta",
                                      "eta theta iota",   "kappa lambda mu",
                                      "nu xi omicron",    "pi rho sigma"};
    for (int t = 0; t < 200; ++t) {
        std::vector<Proposition> props;
        const int n = static_cast<int>(rng() % 13);
        for (int i = 0; i < n; ++i)
            props.push_back({texts[rng() % texts.size()],
                             kAllRoles[rng() % kAllRoles.size()],
                             rng() % 2 ? Verification::Verified
                                       : Verification::Speculative});
        const auto once = moderator::deduplicate(props);
        ensure(moderator::deduplicate(once) == once, "deduplicate is not idempotent");
        std::set<std::string> seen;
        for (const Proposition& p : once)
            ensure(seen.insert(p.text).second, "duplicate text survived");
    }
}

// --------------------------------------------------------------------------
// 6. An agent's run does not depend on the other three.
// --------------------------------------------------------------------------

void agent_isolation() {
    std::mt19937 rng(555u);
    const Query q{"iso", "isolation probe", {}};

    for (int t = 0; t < 50; ++t) {
        RunConfig cfg = sigma::test::base_config();
        cfg.max_searches = static_cast<int>(rng() % 3);
        cfg.max_steps = 2 + static_cast<int>(rng() % 5);
        cfg.candidate_pool = 3;
        cfg.top_k = 2;

        backends::ScriptedPlaybook pb;
        for (AgentRole role : kAllRoles) {
            for (int s = 0; s < cfg.max_steps; ++s) {
                const unsigned action = rng() % 3;
                if (action == 0)
                    pb.entries[{role, s}] = search_text(
                        "probe " + std::to_string(t) + " " + std::to_string(s));
                else if (action == 1)
                    pb.entries[{role, s}] =
                        "Reasoning pass " + std::to_string(s) + " for the probe.";
                else
                    pb.entries[{role, s}] = "Settled. \\boxed{" +
                                            std::to_string(rng() % 100) + "}";
            }
        }

        const auto group =
            runtime::run_all_agents(q, cfg, inline_backends(pb, small_corpus()));
        for (AgentRole role : kAllRoles) {
            AgentState seed = runtime::init_state(cfg.instruction_for(role), q, cfg);
            const runtime::AgentRunResult alone = runtime::run_agent(
                std::move(seed), inline_backends(pb, small_corpus()), cfg);
            ensure(alone.state == group.at(role).state,
                   "state diverges when the other agents run");
            ensure(zero_ts(alone.events) == zero_ts(group.at(role).events),
                   "events diverge when the other agents run");
        }
    }
}

// --------------------------------------------------------------------------
// 7. The wire-format scanner never loses bytes.
// --------------------------------------------------------------------------

void protocol_fuzz() {
    std::mt19937 rng(99u);
    const std::vector<std::string> pieces = {
        "<|begin_search_query|>", "<|end_search_query|>", "<|begin_search_results|>",
        "<|end_search_results|>", "<|begin_search", "_query|>", "<|", "|>", "<",
        "|", ">"};

    auto random_input = [&]() {
        std::string s;
        const int n = static_cast<int>(rng() % 9);
        for (int i = 0; i < n; ++i) {
            if (rng() % 2) {
                s += pieces[rng() % pieces.size()];
            } else {
                const int len = static_cast<int>(rng() % 9);
                for (int j = 0; j < len; ++j)
                    s += static_cast<char>(rng() % 256);
            }
        }
        return s;
    };

    for (int t = 0; t < 100000; ++t) {
        const std::string input = random_input();
        const std::vector<protocol::TokenSpan> spans = protocol::scan_generation(input);

        ensure(!spans.empty(), "scan must always produce at least one span");
        if (input.empty())
            ensure(spans.size() == 1 && spans[0].start == 0 && spans[0].end == 0,
                   "empty input must scan to one empty span");

        size_t pos = 0;
        std::string rebuilt;
        for (const protocol::TokenSpan& span : spans) {
            ensure(span.start == pos, "spans must tile the input without gaps");
            ensure(span.end >= span.start && span.end <= input.size(),
                   "span exceeds the input");
            rebuilt.append(input, span.start, span.end - span.start);
            pos = span.end;
        }
        ensure(pos == input.size() && rebuilt == input,
               "reconstruction lost bytes");

        for (const protocol::TokenSpan& span : spans) {
            if (span.kind == protocol::SpanKind::Plain) continue;
            ensure(span.kind == protocol::SpanKind::SearchQuery,
                   "scanner emitted an unexpected span kind");
            const std::string slice = input.substr(span.start, span.end - span.start);
            const std::string& open = pieces[0];
            const std::string& close = pieces[1];
            ensure(slice.rfind(open, 0) == 0, "span does not start with its opener");
            ensure(slice.size() >= open.size() + close.size() &&
                       slice.compare(slice.size() - close.size(), close.size(), close) ==
                           0,
                   "span does not end with its closer");
        }
    }
}

// --------------------------------------------------------------------------
// 8. Harness arithmetic is exact and order-free.
// --------------------------------------------------------------------------

void harness_arithmetic() {
    RunConfig cfg = config::load_config(sigma::test::fixture_path("config_totient.json"));
    const backends::BackendSet b = config::make_backends(cfg.backends);
    const auto dataset =
        eval::load_dataset(sigma::test::fixture_path("dataset_4.jsonl"));

    cfg.parallelism = 1;
    const eval::RunReport serial = eval::run_eval(dataset, cfg, b);
    ensure(serial.correct_count == 3, "3 of 4 records must score correct");
    ensure(serial.pass_at_1 == 0.75, "pass@1 must equal 0.75 exactly");

    cfg.parallelism = 4;
    const eval::RunReport parallel = eval::run_eval(dataset, cfg, b);
    ensure(eval::report_to_json(serial).dump() == eval::report_to_json(parallel).dump(),
           "parallelism changed the report");
}

// --------------------------------------------------------------------------
// 9. Whole evaluations replay byte for byte.
// --------------------------------------------------------------------------

void end_to_end_determinism() {
    const RunConfig cfg =
        config::load_config(sigma::test::fixture_path("config_totient.json"));
    const auto dataset =
        eval::load_dataset(sigma::test::fixture_path("dataset_10.jsonl"));

    const auto root = sigma::test::make_temp_dir("acceptance_e2e");
    const std::string dir_a = (root / "a").string();
    const std::string dir_b = (root / "b").string();

    const eval::RunReport one =
        eval::run_eval(dataset, cfg, config::make_backends(cfg.backends), dir_a);
    const eval::RunReport two =
        eval::run_eval(dataset, cfg, config::make_backends(cfg.backends), dir_b);

    eval::write_report(one, dir_a + "/report.json");
    eval::write_report(two, dir_b + "/report.json");
    ensure(sigma::test::read_file(dir_a + "/report.json") ==
               sigma::test::read_file(dir_b + "/report.json"),
           "reports differ between runs");

    for (const eval::DatasetRecord& rec : dataset) {
        const std::string name = "/" + rec.id + ".trace.jsonl";
        const std::string trace_a = sigma::test::read_file(dir_a + name);
        ensure(!trace_a.empty(), "missing trace for " + rec.id);
        ensure(trace_a == sigma::test::read_file(dir_b + name),
               "trace differs between runs for " + rec.id);
    }
    std::filesystem::remove_all(root);
}

struct Criterion {
    int number;
    const char* slug;
    double budget_seconds;
    std::function<void()> body;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "golden-trace", 1.0, golden_trace},
        {2, "budget-safety", 10.0, budget_safety},
        {3, "reranking-oracle", 10.0, reranking_oracle},
        {4, "cosine-properties", 5.0, cosine_properties},
        {5, "moderator-determinism", 5.0, moderator_determinism},
        {6, "agent-isolation", 10.0, agent_isolation},
        {7, "protocol-fuzz", 30.0, protocol_fuzz},
        {8, "harness-arithmetic", 5.0, harness_arithmetic},
        {9, "end-to-end-determinism", 10.0, end_to_end_determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string failure;
        try {
            c.body();
        } catch (const std::exception& ex) {
            failure = ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();

        if (failure.empty() && secs < c.budget_seconds) {
            std::printf("PASS %d %s (%.2fs)\n", c.number, c.slug, secs);
        } else {
            ++failures;
            if (failure.empty())
                failure = "exceeded the " + std::to_string(c.budget_seconds) +
                          "s time budget";
            std::printf("FAIL %d %s (%.2fs): %s\n", c.number, c.slug, secs,
                        one_line(failure).c_str());
        }
        std::fflush(stdout);
    }
    return failures;
}
