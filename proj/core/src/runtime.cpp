#include "sigma/runtime.hpp"

#include <chrono>
#include <exception>
#include <functional>
#include <sstream>
#include <thread>

#include "sigma/error.hpp"
#include "sigma/protocol.hpp"
#include "sigma/retrieval.hpp"

namespace sigma::runtime {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

Query query_from_transcript(const AgentState& state) {
    Query q;
    for (const Segment& seg : state.transcript) {
        if (seg.kind == SegmentKind::Query) {
            q.text = seg.text;
            break;
        }
    }
    return q;
}

std::optional<std::string> first_search_payload(const std::string& generated) {
    for (const protocol::TokenSpan& span : protocol::scan_generation(generated)) {
        if (span.kind == protocol::SpanKind::SearchQuery && !span.payload.empty())
            return span.payload;
    }
    return std::nullopt;
}

trace::TraceEvent terminal_event(const AgentState& state,
                                 const std::optional<std::string>& error) {
    trace::TraceEvent ev;
    ev.kind = trace::EventKind::AgentTerminal;
    ev.ts_ms = now_ms();
    ev.role = state.role;
    ev.step = state.step;
    ev.payload = nlohmann::json{
        {"status", to_string(state.status)},
        {"digest", transcript_digest(state.transcript)},
        {"searches_used", count_segments(state.transcript, SegmentKind::SearchResults)},
        {"steps", state.step},
    };
    if (error) ev.payload["error"] = *error;
    return ev;
}

} // namespace

std::string render_prompt(const AgentState& state) {
    std::string out = backends::prompt_header(state.role, state.step);
    for (size_t i = 0; i < state.transcript.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += state.transcript[i].text;
    }
    return out;
}

AgentState init_state(const AgentInstruction& instruction, const Query& q,
                      const RunConfig& cfg) {
    AgentState state;
    state.role = instruction.role;
    state.transcript = {
        Segment{SegmentKind::Instruction, instruction.prompt_text, 0},
        Segment{SegmentKind::Query, q.text, 0},
    };
    state.step = 0;
    state.budget_remaining = cfg.max_searches;
    state.status = AgentStatus::Running;
    return state;
}

ActionKind classify_action(const std::string& generated) {
    if (first_search_payload(generated)) return ActionKind::Search;
    if (protocol::extract_answer(generated)) return ActionKind::Synthesize;
    return ActionKind::Reason;
}

StepOutcome step_agent(AgentState& state, int next_ordinal,
                       const backends::BackendSet& b, const RunConfig& cfg) {
    if (state.status != AgentStatus::Running)
        throw Error(ErrorKind::ParseError, "step_agent requires a Running state");

    const int cycle = state.step;
    backends::GenerationRequest req;
    req.prompt = render_prompt(state);
    req.stop_sequences = cfg.decoding.stop_sequences;
    req.max_tokens = cfg.decoding.max_tokens;
    req.temperature = cfg.decoding.temperature;
    req.seed = cfg.decoding.seed;

    StepOutcome out;
    out.generated_text = b.model->generate(req);
    out.action = classify_action(out.generated_text);

    switch (out.action) {
    case ActionKind::Search: {
        state.transcript.push_back(
            Segment{SegmentKind::SearchQuery, out.generated_text, cycle});
        SearchRequest request;
        request.agent_role = state.role;
        request.query_text = *first_search_payload(out.generated_text);
        request.ordinal = next_ordinal;

        if (state.budget_remaining > 0) {
            const Query query = query_from_transcript(state);
            std::vector<Chunk> candidates =
                retrieval::search(request, *b.search, cfg.candidate_pool);
            retrieval::HypotheticalPassage hypo =
                retrieval::hypo_generate(query, state, request, *b.model, cfg.decoding);
            std::vector<RankedChunk> ranked =
                retrieval::rank_and_select(hypo, candidates, cfg.top_k, *b.embedder);
            std::string block =
                protocol::format_search_results(ranked, cfg.results_limit_chars);
            state.transcript.push_back(
                Segment{SegmentKind::SearchResults, block, cycle});
            state.budget_remaining -= 1;
            out.search = SearchOutcome{std::move(request), std::move(ranked), true};
        } else {
            state.transcript.push_back(Segment{
                SegmentKind::Reasoning, std::string(kBudgetExhaustedNotice), cycle});
            out.search = SearchOutcome{std::move(request), {}, false};
        }
        break;
    }
    case ActionKind::Synthesize:
        state.transcript.push_back(
            Segment{SegmentKind::Conclusion, out.generated_text, cycle});
        state.status = AgentStatus::Concluded;
        break;
    case ActionKind::Reason:
        state.transcript.push_back(
            Segment{SegmentKind::Reasoning, out.generated_text, cycle});
        break;
    }

    state.step += 1;
    return out;
}

AgentRunResult run_agent(AgentState state, const backends::BackendSet& b,
                         const RunConfig& cfg) {
    if (state.status != AgentStatus::Running)
        throw Error(ErrorKind::ParseError, "run_agent requires a Running state");

    AgentRunResult result;
    int search_attempts = 0;

    while (true) {
        if (state.step >= cfg.max_steps) {
            state.status = AgentStatus::StepLimitReached;
            result.events.push_back(terminal_event(state, std::nullopt));
            break;
        }

        const int cycle = state.step;
        const size_t before = state.transcript.size();
        StepOutcome out;
        try {
            out = step_agent(state, search_attempts + 1, b, cfg);
        } catch (const Error& err) {
            state.status = AgentStatus::Failed;
            if (state.transcript.size() > before) {
                std::vector<Segment> appended(state.transcript.begin() + before,
                                              state.transcript.end());
                trace::TraceEvent step_ev = trace::agent_step_event(
                    state.role, cycle, ActionKind::Search, appended);
                step_ev.ts_ms = now_ms();
                result.events.push_back(std::move(step_ev));
            }
            result.events.push_back(terminal_event(state, err.what()));
            break;
        }

        if (out.search) {
            search_attempts = out.search->request.ordinal;
            trace::TraceEvent issued;
            issued.kind = trace::EventKind::SearchIssued;
            issued.ts_ms = now_ms();
            issued.role = state.role;
            issued.step = cycle;
            issued.payload = nlohmann::json{
                {"query", out.search->request.query_text},
                {"ordinal", out.search->request.ordinal},
                {"executed", out.search->executed},
            };
            result.events.push_back(std::move(issued));

            if (out.search->executed) {
                trace::TraceEvent injected;
                injected.kind = trace::EventKind::ResultsInjected;
                injected.ts_ms = now_ms();
                injected.role = state.role;
                injected.step = cycle;
                nlohmann::json docs = nlohmann::json::array();
                for (const RankedChunk& rc : out.search->results)
                    docs.push_back(nlohmann::json{
                        {"doc_id", rc.chunk.doc_id},
                        {"similarity", rc.similarity},
                    });
                injected.payload = nlohmann::json{
                    {"ordinal", out.search->request.ordinal},
                    {"results", std::move(docs)},
                };
                result.events.push_back(std::move(injected));
            }
        }

        std::vector<Segment> appended(state.transcript.begin() + before,
                                      state.transcript.end());
        trace::TraceEvent step_ev =
            trace::agent_step_event(state.role, cycle, out.action, appended);
        step_ev.ts_ms = now_ms();
        result.events.push_back(std::move(step_ev));

        if (state.status == AgentStatus::Concluded) {
            result.events.push_back(terminal_event(state, std::nullopt));
            break;
        }
    }

    result.state = std::move(state);
    return result;
}

std::map<AgentRole, AgentRunResult> run_all_agents(const Query& q,
                                                   const RunConfig& cfg,
                                                   const backends::BackendSet& b) {
    validate_config(cfg);

    std::map<AgentRole, AgentRunResult> results;
    for (AgentRole role : kAllRoles) results.emplace(role, AgentRunResult{});

    auto worker = [&](AgentRole role, AgentRunResult& slot) {
        try {
            AgentState seed = init_state(cfg.instruction_for(role), q, cfg);
            slot = run_agent(std::move(seed), b, cfg);
        } catch (const std::exception& ex) {
            AgentState state = init_state(cfg.instruction_for(role), q, cfg);
            state.status = AgentStatus::Failed;
            slot.state = std::move(state);
            slot.events = {terminal_event(slot.state, ex.what())};
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(kAllRoles.size());
    for (AgentRole role : kAllRoles)
        threads.emplace_back(worker, role, std::ref(results.at(role)));
    for (std::thread& t : threads) t.join();

    bool any_ok = false;
    for (const auto& [role, res] : results)
        if (res.state.status != AgentStatus::Failed) any_ok = true;
    if (!any_ok) {
        std::ostringstream os;
        os << "all agents failed:";
        for (const auto& [role, res] : results) {
            std::string detail = "unknown error";
            if (!res.events.empty() && res.events.back().payload.contains("error"))
                detail = res.events.back().payload["error"].get<std::string>();
            os << ' ' << to_string(role) << ": " << detail << ';';
        }
        throw Error(ErrorKind::AllAgentsFailed, os.str());
    }
    return results;
}

} // namespace sigma::runtime
