#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "sigma/config_io.hpp"
#include "sigma/error.hpp"
#include "sigma/eval.hpp"
#include "sigma/protocol.hpp"
#include "sigma/trace.hpp"

namespace {

using namespace sigma;

void apply_backend_flag(RunConfig& cfg, const std::string& backend_flag) {
    if (backend_flag.empty()) return;
    cfg.backends.kind = backend_flag == "http" ? BackendKind::Http : BackendKind::Scripted;
    if (cfg.backends.kind == BackendKind::Scripted && cfg.backends.playbook_path.empty())
        throw Error(ErrorKind::ParseError,
                    "backends.playbook: required to run with --backend scripted");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open query file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_agent_lines(const std::map<AgentRole, AgentState>& states) {
    for (AgentRole role : kAllRoles) {
        auto it = states.find(role);
        if (it == states.end()) continue;
        const AgentState& state = it->second;
        std::string answer;
        if (!state.transcript.empty() && state.transcript.back().kind == SegmentKind::Conclusion)
            if (auto extracted = protocol::extract_answer(state.transcript.back().text))
                answer = *extracted;
        std::cout << "agent " << to_string(role) << " status=" << to_string(state.status)
                  << " searches=" << count_segments(state.transcript, SegmentKind::SearchResults)
                  << " steps=" << state.step << " answer=" << answer << '\n';
    }
}

int run_solve(const std::string& config_path, const std::string& query_text,
              const std::string& query_file, const std::string& trace_path,
              const std::string& backend_flag) {
    if (query_text.empty() == query_file.empty()) {
        std::cerr << "solve requires exactly one of --query or --query-file\n";
        return 1;
    }
    RunConfig cfg = config::load_config(config_path);
    apply_backend_flag(cfg, backend_flag);

    Query q;
    q.id = "cli";
    q.text = query_file.empty() ? query_text : read_text_file(query_file);

    backends::BackendSet b = config::make_backends(cfg.backends);
    eval::SolveResult res = eval::solve_query(q, cfg, b);

    if (!trace_path.empty()) trace::write_trace(res.events, trace_path);

    if (res.final) std::cout << "final " << res.final->answer << '\n';
    print_agent_lines(res.states);
    if (!trace_path.empty()) std::cout << "trace " << trace_path << '\n';

    if (!res.final) {
        std::cerr << (res.error.empty() ? "no final answer" : res.error) << '\n';
        return 2;
    }
    return 0;
}

int run_eval_cmd(const std::string& config_path, const std::string& dataset_path,
                 const std::string& out_dir, int parallelism,
                 const std::string& backend_flag) {
    RunConfig cfg = config::load_config(config_path);
    apply_backend_flag(cfg, backend_flag);
    if (parallelism > 0) cfg.parallelism = parallelism;

    std::vector<eval::DatasetRecord> dataset = eval::load_dataset(dataset_path);
    backends::BackendSet b = config::make_backends(cfg.backends);

    eval::RunReport report = eval::run_eval(dataset, cfg, b, out_dir + "/traces");
    const std::string report_path = out_dir + "/report.json";
    eval::write_report(report, report_path);

    std::printf("pass@1 %g\n", report.pass_at_1);
    std::cout << "report " << report_path << '\n';
    return 0;
}

int run_replay(const std::string& trace_path, bool dump) {
    std::vector<trace::TraceEvent> events = trace::read_trace(trace_path);
    trace::ReplayedRun run = trace::replay(events);

    std::cout << "final " << (run.final_answer ? *run.final_answer : "none") << '\n';
    for (AgentRole role : kAllRoles) {
        auto it = run.transcripts.find(role);
        if (it == run.transcripts.end()) continue;
        std::cout << "agent " << to_string(role)
                  << " status=" << to_string(run.statuses.at(role))
                  << " segments=" << it->second.size() << '\n';
    }
    if (dump) {
        for (AgentRole role : kAllRoles) {
            auto it = run.transcripts.find(role);
            if (it == run.transcripts.end()) continue;
            std::cout << "--- " << to_string(role) << " ---\n";
            for (const Segment& seg : it->second)
                std::cout << '[' << to_string(seg.kind) << "] " << seg.text << "\n\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SIGMA multi-agent reasoning runtime"};
    app.require_subcommand(1);

    std::string solve_config, solve_query_text, solve_query_file, solve_trace, solve_backend;
    CLI::App* solve = app.add_subcommand("solve", "Answer one query");
    solve->add_option("--config", solve_config, "Run configuration (JSON)")->required();
    solve->add_option("--query", solve_query_text, "Query text");
    solve->add_option("--query-file", solve_query_file, "File containing the query text");
    solve->add_option("--trace", solve_trace, "Write the event trace to this path");
    solve->add_option("--backend", solve_backend, "Override the configured model backend")
        ->check(CLI::IsMember({"scripted", "http"}));

    std::string eval_config, eval_dataset, eval_out, eval_backend;
    int eval_parallelism = 0;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score a dataset");
    eval_cmd->add_option("--config", eval_config, "Run configuration (JSON)")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "Line-delimited JSON dataset")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory for report and traces")
        ->required();
    eval_cmd->add_option("--parallelism", eval_parallelism,
                         "Concurrent records (overrides config)");
    eval_cmd->add_option("--backend", eval_backend, "Override the configured model backend")
        ->check(CLI::IsMember({"scripted", "http"}));

    std::string replay_trace;
    bool replay_dump = false;
    CLI::App* replay = app.add_subcommand("replay", "Render a recorded trace");
    replay->add_option("--trace", replay_trace, "Trace file to replay")->required();
    replay->add_flag("--dump", replay_dump, "Print the reconstructed transcripts");

    std::string validate_config_path;
    CLI::App* validate = app.add_subcommand("validate-config", "Check a configuration file");
    validate->add_option("--config", validate_config_path, "Run configuration (JSON)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed())
            return run_solve(solve_config, solve_query_text, solve_query_file, solve_trace,
                             solve_backend);
        if (eval_cmd->parsed())
            return run_eval_cmd(eval_config, eval_dataset, eval_out, eval_parallelism,
                                eval_backend);
        if (replay->parsed()) return run_replay(replay_trace, replay_dump);
        if (validate->parsed()) {
            validate_config(config::load_config(validate_config_path));
            std::cout << "ok\n";
            return 0;
        }
    } catch (const Error& err) {
        std::cerr << err.what() << '\n';
        return err.kind() == ErrorKind::NoAnswer || err.kind() == ErrorKind::AllAgentsFailed
                   ? 2
                   : 1;
    } catch (const std::exception& ex) {
        std::cerr << ex.what() << '\n';
        return 1;
    }
    return 1;
}
