#include "cli.hpp"

#include "ensemblekit/error.hpp"
#include "ensemblekit/event_log.hpp"
#include "ensemblekit/examples.hpp"
#include "ensemblekit/local_backend.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/resilience.hpp"
#include "ensemblekit/sim_engine.hpp"
#include "ensemblekit/workflow_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>

namespace fs = std::filesystem;

namespace ensemblekit::cli {

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfig = 2;

struct CommandConfig {
    std::string workflow;
    std::string example;
    ExampleParams example_params;
    std::string platform_path;
    std::string profile;
    std::string backend = "sim";
    int nodes = 0;
    double walltime = 0;
    std::uint64_t seed = 0;
    int max_attempts = 1;
    double launch_rate_cap = 0;
    double launch_delay = 0;
    std::string runtime;
    std::vector<std::string> fail_nodes;
    std::vector<std::string> fail_nodes_transient;
    std::vector<std::string> fail_tasks;
    double fault_probability = 0;
    bool retry_canceled = false;
    int max_parallel = 0;
    std::string out;
    std::string format = "csv";
    std::string log;
    bool no_optimization = false;
};

std::vector<WorkflowSpec> load_input_workflows(const CommandConfig& c) {
    if (!c.workflow.empty() && !c.example.empty())
        throw ConfigError("--workflow and --example are mutually exclusive");
    if (!c.example.empty()) {
        ExampleParams p = c.example_params;
        p.seed = c.seed;
        p.optimization = !c.no_optimization;
        return {generate_example(c.example, p)};
    }
    if (c.workflow.empty()) throw ConfigError("one of --workflow or --example is required");
    if (!fs::exists(c.workflow)) throw ConfigError("workflow file not found: " + c.workflow);
    return load_workflows(c.workflow);
}

PlatformConfig load_platform(const CommandConfig& c, const std::string& fallback_profile) {
    if (!c.platform_path.empty() && !c.profile.empty())
        throw ConfigError("--platform and --profile are mutually exclusive");
    if (!c.platform_path.empty()) {
        if (fs::exists(c.platform_path)) return load_platform_config(c.platform_path);
        // A bare name is accepted as a profile.
        if (c.platform_path.find('/') == std::string::npos && c.platform_path.find(".json") == std::string::npos)
            return builtin_profile(c.platform_path);
        throw ConfigError("platform file not found: " + c.platform_path);
    }
    return builtin_profile(c.profile.empty() ? fallback_profile : c.profile);
}

std::pair<std::string, double> split_at(const std::string& s, const char* flag) {
    const auto at = s.rfind('@');
    if (at == std::string::npos) throw ConfigError(std::string(flag) + " expects VALUE@NUMBER, got " + s);
    try {
        std::size_t used = 0;
        const double v = std::stod(s.substr(at + 1), &used);
        if (used != s.size() - at - 1) throw std::invalid_argument(s);
        return {s.substr(0, at), v};
    } catch (const std::exception&) {
        throw ConfigError(std::string(flag) + ": bad number in " + s);
    }
}

int parse_node(const std::string& s, const char* flag) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(flag) + ": bad node id " + s);
    }
}

RuntimeDistribution parse_runtime(const std::string& text) {
    if (text.empty() || text == "expected") return RuntimeDistribution::from_expected();
    try {
        if (text.rfind("fixed:", 0) == 0) return RuntimeDistribution::fixed(std::stod(text.substr(6)));
        if (text.rfind("uniform:", 0) == 0) {
            const auto rest = text.substr(8);
            const auto colon = rest.find(':');
            if (colon != std::string::npos)
                return RuntimeDistribution::uniform(std::stod(rest.substr(0, colon)),
                                                    std::stod(rest.substr(colon + 1)));
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("--runtime expects expected | fixed:S | uniform:LO:HI, got " + text);
}

FailureModel build_failures(const CommandConfig& c) {
    FailureModel f;
    f.seed = c.seed;
    f.random_task_fault_probability = c.fault_probability;
    for (const auto& s : c.fail_nodes) {
        auto [node, ts] = split_at(s, "--fail-node");
        f.faults.push_back(Fault::persistent_node(parse_node(node, "--fail-node"), ts));
    }
    for (const auto& s : c.fail_nodes_transient) {
        auto [node, ts] = split_at(s, "--fail-node-transient");
        f.faults.push_back(Fault::transient_node(parse_node(node, "--fail-node-transient"), ts));
    }
    for (const auto& s : c.fail_tasks) {
        auto [uid, fraction] = split_at(s, "--fail-task");
        f.faults.push_back(Fault::task_fault(uid, fraction));
    }
    return f;
}

fs::path out_dir(const CommandConfig& c) {
    fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    return dir;
}

fs::path log_path(const fs::path& dir, int attempt) {
    return dir / ("attempt-" + std::to_string(attempt) + ".events.jsonl");
}

struct Counts {
    std::size_t done = 0, failed = 0, canceled = 0;
};

Counts count_outcomes(const EventLog& log) {
    Counts c;
    for (const auto& e : log) {
        if (e.kind == EventKind::TaskDone) ++c.done;
        if (e.kind == EventKind::TaskFailed) ++c.failed;
        if (e.kind == EventKind::TaskCanceled) ++c.canceled;
    }
    return c;
}

PlatformConfig platform_from_job(const JobInfo& info) {
    PlatformConfig p;
    p.name = info.platform.empty() ? "from-log" : info.platform;
    p.node = {std::max(1, info.cores_per_node), 0, info.gpus_per_node};
    p.node_count = std::max(1, info.nodes);
    p.policy.tiers = {{p.node_count, std::max(1.0, info.walltime_s)}};
    return p;
}

/// Writes logs and plans of a retry chain and prints one summary line per attempt.
int finish_chain(const RetryOutcome& outcome, const fs::path& dir, std::ostream& out,
                 const std::function<PlatformConfig(const EventLog&)>& platform_for) {
    for (std::size_t k = 0; k < outcome.logs.size(); ++k) {
        const int attempt = static_cast<int>(k) + 1;
        const auto& log = outcome.logs[k];
        const auto path = log_path(dir, attempt);
        save_event_log(log, path);
        const auto counts = count_outcomes(log);
        const auto info = job_info(log);
        const auto util = compute_utilization(log, platform_for(log), info ? info->nodes : 1);
        out << "attempt " << attempt << ": tasks done=" << counts.done << " failed=" << counts.failed
            << " canceled=" << counts.canceled << " makespan=" << format_double(util.job_runtime_s)
            << "s utilization=" << format_double(util.nodes.utilization_fraction) << " log=" << path.string()
            << "\n";
    }
    for (const auto& plan : outcome.plans) {
        const auto base = dir / ("attempt-" + std::to_string(plan.attempt) + ".plan");
        save_workflows(plan.workflows, base.string() + ".json");
        std::ofstream(base.string() + ".sidecar.json") << dump_plan_sidecar(plan);
    }
    if (outcome.unresolved.empty()) return kOk;
    out << "unresolved:";
    for (const auto& r : outcome.unresolved) out << " " << r.uid << "(" << to_string(r.kind) << ")";
    out << "\n";
    return kFailed;
}

int cmd_simulate(const CommandConfig& c, std::ostream& out) {
    auto specs = load_input_workflows(c);
    const auto platform = load_platform(c, "frontier-sim");
    SimConfig sim;
    sim.allocation_nodes = c.nodes > 0 ? c.nodes : platform.node_count;
    sim.walltime_s = c.walltime > 0 ? c.walltime : max_walltime_for(platform.policy, sim.allocation_nodes);
    sim.runtime.default_distribution = parse_runtime(c.runtime);
    sim.runtime.seed = c.seed;
    sim.failures = build_failures(c);
    sim.launch_delay_s = c.launch_delay;
    if (c.launch_rate_cap > 0) sim.launch_rate_cap = c.launch_rate_cap;
    if (c.max_attempts < 1) throw ConfigError("--max-attempts must be ≥ 1");
    // Surface configuration problems before any output is written.
    SimulatedJob probe(specs, platform, sim);

    const auto outcome = retry_loop_simulated(specs, platform, sim, c.max_attempts, c.retry_canceled);
    return finish_chain(outcome, out_dir(c), out, [&](const EventLog&) { return platform; });
}

int cmd_run(const CommandConfig& c, std::ostream& out) {
    auto specs = load_input_workflows(c);
    if (c.backend != "local") throw ConfigError("run uses the local backend; use simulate for --backend sim");
    auto platform = load_platform(c, "local");
    if (c.max_attempts < 1) throw ConfigError("--max-attempts must be ≥ 1");
    const int parallel =
        c.max_parallel > 0 ? c.max_parallel : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto dir = out_dir(c);
    const JobRunner runner = [&](const std::vector<WorkflowSpec>& wf, const AllocationRequest&, int attempt) {
        LocalConfig lc;
        lc.max_parallel = parallel;
        lc.out_dir = dir;
        lc.attempt = attempt;
        return run_local(wf, platform, lc);
    };
    const auto outcome = retry_loop(specs, platform, {1, 0}, runner, c.max_attempts, c.retry_canceled);
    return finish_chain(outcome, dir, out, [&](const EventLog& log) {
        return platform_from_job(job_info(log).value_or(JobInfo{}));
    });
}

int cmd_report(const CommandConfig& c, std::ostream& out) {
    if (c.log.empty()) throw ConfigError("report needs an event log path");
    if (!fs::exists(c.log)) throw ConfigError("log file not found: " + c.log);
    const auto format = parse_export_format(c.format);
    const auto log = load_event_log(c.log);
    require_complete(log);
    const auto info = job_info(log);
    PlatformConfig platform;
    if (!c.platform_path.empty() || !c.profile.empty())
        platform = load_platform(c, "frontier-sim");
    else if (info)
        platform = platform_from_job(*info);
    else
        throw ConfigError("log carries no allocation info; pass --platform/--profile and --nodes");
    const int nodes = c.nodes > 0 ? c.nodes : (info ? info->nodes : 0);
    if (nodes < 1) throw ConfigError("allocation size unknown; pass --nodes");

    const auto util = compute_utilization(log, platform, nodes);
    const auto series = concurrency_series(log);
    RateSummary rates;
    try {
        rates = throughput(log);
    } catch (const InsufficientData&) {
    }
    const auto dir = out_dir(c);
    const std::string ext = format == ExportFormat::Csv ? ".csv" : ".json";
    export_metrics(util, format, dir / ("utilization" + ext));
    export_metrics(series, format, dir / ("concurrency" + ext));
    export_metrics(rates, format, dir / ("rates" + ext));

    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
    out << "ovh=" << format_double(util.ovh_s) << "s ttx=" << format_double(util.ttx_s)
        << "s runtime=" << format_double(util.job_runtime_s) << "s utilization(nodes)="
        << format_double(util.nodes.utilization_fraction)
        << " utilization(cores)=" << format_double(util.cores.utilization_fraction)
        << " peak_running=" << series.max_running()
        << " scheduling_rate=" << opt(rates.scheduling_rate_tasks_per_s)
        << " launching_rate=" << opt(rates.launching_rate_tasks_per_s) << "\n";
    return kOk;
}

int cmd_resubmit(const CommandConfig& c, std::ostream& out) {
    if (c.log.empty()) throw ConfigError("resubmit needs --log");
    if (!fs::exists(c.log)) throw ConfigError("log file not found: " + c.log);
    const auto specs = load_input_workflows(c);
    const auto log = load_event_log(c.log);
    const auto info = job_info(log);
    const auto platform = load_platform(c, info ? info->platform : "frontier-sim");
    AllocationRequest original{c.nodes > 0 ? c.nodes : (info ? info->nodes : platform.node_count),
                               c.walltime > 0 ? c.walltime : (info ? info->walltime_s : 0)};
    const auto records = collect_failures(log, specs, c.retry_canceled);
    if (records.empty()) {
        out << "nothing to resubmit: no failed tasks in " << c.log << "\n";
        return kOk;
    }
    const auto plan = plan_resubmission(records, specs, platform, original, info ? info->attempt : 1,
                                        fs::path(c.log).filename().string());
    const auto dir = out_dir(c);
    save_workflows(plan.workflows, dir / "plan.json");
    std::ofstream(dir / "plan.sidecar.json") << dump_plan_sidecar(plan);
    std::size_t stages = 0;
    for (const auto& w : plan.workflows) stages += w.stages.size();
    out << "plan: " << records.size() << " tasks in " << stages << " stages, attempt=" << plan.attempt
        << " nodes=" << plan.allocation.nodes << " walltime=" << format_double(plan.allocation.walltime_s)
        << "s" << (plan.feasible ? "" : " (expected runtime exceeds walltime)") << "\n";
    return kOk;
}

int cmd_example(const CommandConfig& c, std::ostream& out) {
    if (c.example.empty()) throw ConfigError("example needs --example SHAPE");
    ExampleParams p = c.example_params;
    p.seed = c.seed;
    p.optimization = !c.no_optimization;
    const auto spec = generate_example(c.example, p);
    if (c.out.empty() || c.out == "-")
        out << dump_workflows({spec});
    else
        save_workflows({spec}, c.out);
    return kOk;
}

void add_workflow_options(CLI::App* sub, CommandConfig& c) {
    sub->add_option("--workflow", c.workflow, "Workflow JSON file");
    sub->add_option("--example", c.example, "Generate a built-in workflow shape instead");
    sub->add_option("--tasks", c.example_params.tasks, "Example size (shape specific)");
    sub->add_option("--cases", c.example_params.cases, "Melt-pool cases (exaca, uq-stage1)");
    sub->add_option("--uq-params", c.example_params.uq_params, "UQ parameter sets (exaca, uq-stage1)");
    sub->add_option("--stages", c.example_params.stages, "Stage count (toy)");
    sub->add_option("--mock", c.example_params.mock, "Mock payload: sleep or handoff");
    sub->add_option("--mock-sleep", c.example_params.mock_sleep_s, "Seconds each mock payload sleeps");
    sub->add_flag("--no-optimization", c.no_optimization, "exaconstit without the trailing optimization");
}

void add_platform_options(CLI::App* sub, CommandConfig& c) {
    sub->add_option("--platform", c.platform_path, "Platform config JSON (or profile name)");
    sub->add_option("--profile", c.profile, "Built-in or $ENSEMBLEKIT_PROFILE_DIR profile name");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ensemblekit: pipeline-stage-task ensembles on a simulated or local pilot"};
    app.require_subcommand(1);
    CommandConfig c;

    auto* simulate = app.add_subcommand("simulate", "Run a workflow on the discrete-event cluster simulator");
    add_workflow_options(simulate, c);
    add_platform_options(simulate, c);
    simulate->add_option("--backend", c.backend, "Only 'sim' is valid here")->check(CLI::IsMember({"sim"}));
    simulate->add_option("--nodes", c.nodes, "Allocation size (default: whole platform)");
    simulate->add_option("--walltime", c.walltime, "Job walltime in seconds (default: policy maximum)");
    simulate->add_option("--seed", c.seed, "Seed for runtimes and random faults");
    simulate->add_option("--max-attempts", c.max_attempts, "Resubmit failed tasks up to this many jobs");
    simulate->add_option("--launch-rate-cap", c.launch_rate_cap, "Global task launches per second");
    simulate->add_option("--launch-delay", c.launch_delay, "Seconds from scheduling to launch");
    simulate->add_option("--runtime", c.runtime, "expected | fixed:S | uniform:LO:HI");
    simulate->add_option("--fail-node", c.fail_nodes, "Persistent node fault NODE@TS")->take_all();
    simulate->add_option("--fail-node-transient", c.fail_nodes_transient, "Transient node fault NODE@TS")
        ->take_all();
    simulate->add_option("--fail-task", c.fail_tasks, "Task fault UID@FRACTION")->take_all();
    simulate->add_option("--fault-probability", c.fault_probability, "Random per-launch task fault chance");
    simulate->add_flag("--retry-canceled", c.retry_canceled, "Resubmit walltime-canceled tasks too");
    simulate->add_option("--out", c.out, "Output directory for event logs");

    auto* run = app.add_subcommand("run", "Execute a workflow as local subprocesses");
    add_workflow_options(run, c);
    add_platform_options(run, c);
    run->add_option("--backend", c.backend, "Only 'local' is valid here")->check(CLI::IsMember({"local"}));
    c.backend = "local";
    run->add_option("--max-parallel", c.max_parallel, "Concurrent subprocesses (default: host cores)");
    run->add_option("--max-attempts", c.max_attempts, "Resubmit failed tasks up to this many runs");
    run->add_option("--seed", c.seed, "Seed for generated examples");
    run->add_flag("--retry-canceled", c.retry_canceled, "Resubmit canceled tasks too");
    run->add_option("--out", c.out, "Output directory for logs and task output")->required();

    auto* report = app.add_subcommand("report", "Compute utilization, concurrency and rates from a log");
    report->add_option("log,--log", c.log, "Event log (JSON lines)");
    add_platform_options(report, c);
    report->add_option("--nodes", c.nodes, "Allocation size (default: from the log)");
    report->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--out", c.out, "Output directory");

    auto* resubmit = app.add_subcommand("resubmit", "Plan a job for the failed tasks of a log");
    resubmit->add_option("--log", c.log, "Event log of the finished job")->required();
    add_workflow_options(resubmit, c);
    add_platform_options(resubmit, c);
    resubmit->add_option("--seed", c.seed, "Seed used when the example was generated");
    resubmit->add_option("--nodes", c.nodes, "Original allocation size (default: from the log)");
    resubmit->add_option("--walltime", c.walltime, "Original walltime (default: from the log)");
    resubmit->add_flag("--retry-canceled", c.retry_canceled, "Include walltime-canceled tasks");
    resubmit->add_option("--out", c.out, "Output directory for plan.json and plan.sidecar.json");

    auto* example = app.add_subcommand("example", "Write a generated workflow");
    add_workflow_options(example, c);
    example->add_option("--seed", c.seed, "Seed for expected runtimes");
    example->add_option("--out", c.out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*simulate) return cmd_simulate(c, out);
        if (*run) return cmd_run(c, out);
        if (*report) return cmd_report(c, out);
        if (*resubmit) return cmd_resubmit(c, out);
        if (*example) return cmd_example(c, out);
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfig;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kConfig;
}

} // namespace ensemblekit::cli
