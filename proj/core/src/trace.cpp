#include "sigma/trace.hpp"

#include <fstream>
#include <sstream>

#include "sigma/error.hpp"

namespace sigma::trace {

namespace {

nlohmann::json segment_to_json(const Segment& seg) {
    return nlohmann::json{
        {"kind", to_string(seg.kind)},
        {"step", seg.step_index},
        {"text", seg.text},
    };
}

Segment segment_from_json(const nlohmann::json& j) {
    Segment seg;
    seg.kind = segment_kind_from_string(j.at("kind").get<std::string>());
    seg.step_index = j.at("step").get<int>();
    seg.text = j.at("text").get<std::string>();
    return seg;
}

} // namespace

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::RunStart: return "run_start";
    case EventKind::AgentStep: return "agent_step";
    case EventKind::SearchIssued: return "search_issued";
    case EventKind::ResultsInjected: return "results_injected";
    case EventKind::AgentTerminal: return "agent_terminal";
    case EventKind::ModeratorDecision: return "moderator_decision";
    case EventKind::RunEnd: return "run_end";
    }
    return "run_start";
}

EventKind event_kind_from_string(const std::string& name) {
    if (name == "run_start") return EventKind::RunStart;
    if (name == "agent_step") return EventKind::AgentStep;
    if (name == "search_issued") return EventKind::SearchIssued;
    if (name == "results_injected") return EventKind::ResultsInjected;
    if (name == "agent_terminal") return EventKind::AgentTerminal;
    if (name == "moderator_decision") return EventKind::ModeratorDecision;
    if (name == "run_end") return EventKind::RunEnd;
    throw Error(ErrorKind::ParseError, "unknown trace event kind '" + name + "'");
}

TraceEvent agent_step_event(AgentRole role, int step, ActionKind action,
                            const std::vector<Segment>& appended) {
    TraceEvent ev;
    ev.kind = EventKind::AgentStep;
    ev.role = role;
    ev.step = step;
    nlohmann::json segs = nlohmann::json::array();
    for (const Segment& seg : appended) segs.push_back(segment_to_json(seg));
    ev.payload = nlohmann::json{{"action", to_string(action)}, {"segments", std::move(segs)}};
    return ev;
}

std::string serialize_event(const TraceEvent& event) {
    nlohmann::json j{
        {"kind", to_string(event.kind)},
        {"ts_ms", event.ts_ms},
        {"step", event.step},
        {"payload", event.payload},
    };
    if (event.role) j["role"] = to_string(*event.role);
    return j.dump();
}

TraceEvent parse_event(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::ParseError, std::string("bad trace line: ") + ex.what());
    }
    try {
        TraceEvent ev;
        ev.kind = event_kind_from_string(j.at("kind").get<std::string>());
        ev.ts_ms = j.at("ts_ms").get<std::int64_t>();
        ev.step = j.at("step").get<int>();
        ev.payload = j.at("payload");
        if (j.contains("role")) ev.role = role_from_string(j.at("role").get<std::string>());
        return ev;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::ParseError, std::string("bad trace event: ") + ex.what());
    }
}

void write_trace(const std::vector<TraceEvent>& events, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open trace file for writing: " + path);
    for (const TraceEvent& ev : events) out << serialize_event(ev) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing trace file: " + path);
}

std::vector<TraceEvent> read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open trace file: " + path);
    std::vector<TraceEvent> events;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(parse_event(line));
        } catch (const Error& err) {
            throw Error(ErrorKind::ParseError,
                        path + " line " + std::to_string(line_no) + ": " + err.what());
        }
    }
    return events;
}

ReplayedRun replay(const std::vector<TraceEvent>& events) {
    if (events.empty()) throw Error(ErrorKind::ParseError, "empty trace");
    if (events.front().kind != EventKind::RunStart)
        throw Error(ErrorKind::ParseError, "trace does not begin with run_start");

    ReplayedRun run;
    const nlohmann::json& start = events.front().payload;
    try {
        run.query.id = start.at("query").at("id").get<std::string>();
        run.query.text = start.at("query").at("text").get<std::string>();
        for (const auto& [role_name, prompt] : start.at("instructions").items()) {
            AgentRole role = role_from_string(role_name);
            Segment instr{SegmentKind::Instruction, prompt.get<std::string>(), 0};
            Segment query_seg{SegmentKind::Query, run.query.text, 0};
            run.transcripts[role] = {instr, query_seg};
            run.statuses[role] = AgentStatus::Running;
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::ParseError, std::string("bad run_start payload: ") + ex.what());
    }

    for (std::size_t i = 1; i < events.size(); ++i) {
        const TraceEvent& ev = events[i];
        switch (ev.kind) {
        case EventKind::AgentStep: {
            if (!ev.role) throw Error(ErrorKind::ParseError, "agent_step without role");
            auto it = run.transcripts.find(*ev.role);
            if (it == run.transcripts.end())
                throw Error(ErrorKind::ParseError, "agent_step for role missing from run_start");
            try {
                for (const nlohmann::json& seg : ev.payload.at("segments"))
                    it->second.push_back(segment_from_json(seg));
            } catch (const nlohmann::json::exception& ex) {
                throw Error(ErrorKind::ParseError,
                            std::string("bad agent_step payload: ") + ex.what());
            }
            break;
        }
        case EventKind::AgentTerminal: {
            if (!ev.role) throw Error(ErrorKind::ParseError, "agent_terminal without role");
            auto it = run.transcripts.find(*ev.role);
            if (it == run.transcripts.end())
                throw Error(ErrorKind::ParseError,
                            "agent_terminal for role missing from run_start");
            std::string status = ev.payload.value("status", "");
            run.statuses[*ev.role] = agent_status_from_string(status);
            if (ev.payload.contains("digest")) {
                std::string expected = ev.payload.at("digest").get<std::string>();
                std::string actual = transcript_digest(it->second);
                if (expected != actual)
                    throw Error(ErrorKind::ParseError,
                                "transcript digest mismatch for " +
                                    std::string(to_string(*ev.role)) + ": trace says " +
                                    expected + ", replay computes " + actual);
            }
            break;
        }
        case EventKind::ModeratorDecision:
            if (ev.payload.contains("answer"))
                run.final_answer = ev.payload.at("answer").get<std::string>();
            break;
        case EventKind::RunEnd:
            if (ev.payload.contains("final_answer") && ev.payload.at("final_answer").is_string())
                run.final_answer = ev.payload.at("final_answer").get<std::string>();
            break;
        case EventKind::SearchIssued:
        case EventKind::ResultsInjected:
            break;
        case EventKind::RunStart:
            throw Error(ErrorKind::ParseError, "duplicate run_start in trace");
        }
    }
    return run;
}

} // namespace sigma::trace
