#include "ensemblekit/resilience.hpp"

#include "ensemblekit/error.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace ensemblekit {

std::string_view to_string(FailureKind kind) noexcept {
    switch (kind) {
    case FailureKind::NodeFailure: return "node_failure";
    case FailureKind::TaskFault: return "task_fault";
    case FailureKind::Canceled: return "canceled";
    }
    return "?";
}

namespace {

struct Location {
    std::size_t pipeline;
    std::size_t stage;
};

std::unordered_map<std::string, Location> locate(const std::vector<WorkflowSpec>& specs) {
    std::unordered_map<std::string, Location> out;
    for (std::size_t p = 0; p < specs.size(); ++p)
        for (std::size_t s = 0; s < specs[p].stages.size(); ++s)
            for (const auto& t : specs[p].stages[s].tasks) out.emplace(t.uid(), Location{p, s});
    return out;
}

} // namespace

std::vector<FailureRecord> collect_failures(const EventLog& log, const std::vector<WorkflowSpec>& specs,
                                            bool include_canceled) {
    require_complete(log);
    const auto where = locate(specs);
    std::vector<FailureRecord> out;
    for (const auto& e : log) {
        const bool failed = e.kind == EventKind::TaskFailed;
        const bool canceled = e.kind == EventKind::TaskCanceled;
        if (!failed && !(canceled && include_canceled)) continue;
        if (!e.task_uid) throw MalformedLog(std::string(to_string(e.kind)) + " without task_uid");
        auto it = where.find(*e.task_uid);
        if (it == where.end()) throw MalformedLog("task " + *e.task_uid + " is not in the workflow");
        const auto& [p, s] = it->second;
        FailureRecord r;
        r.uid = *e.task_uid;
        r.pipeline = specs[p].name;
        r.stage_name = specs[p].stages[s].name;
        r.stage_index = s;
        r.ts = e.ts;
        if (canceled)
            r.kind = FailureKind::Canceled;
        else if (e.detail.rfind("node_failure", 0) == 0)
            r.kind = FailureKind::NodeFailure;
        else
            r.kind = FailureKind::TaskFault;
        out.push_back(std::move(r));
    }
    return out;
}

ResubmissionPlan plan_resubmission(const std::vector<FailureRecord>& records,
                                   const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                                   const AllocationRequest& original, int parent_attempt,
                                   std::string parent_log) {
    if (records.empty()) throw EmptyPlan("no failed tasks to resubmit");
    const auto where = locate(specs);
    std::set<std::string> failed;
    for (const auto& r : records) {
        if (!where.contains(r.uid)) throw ConfigError("failed task " + r.uid + " is not in the workflow");
        failed.insert(r.uid);
    }

    ResubmissionPlan plan;
    plan.attempt = parent_attempt + 1;
    plan.parent_log = std::move(parent_log);
    int total_nodes = 0;
    double longest_pipeline = 0;
    for (const auto& spec : specs) {
        WorkflowSpec out;
        out.name = spec.name;
        int widest = 0;
        double pipeline_runtime = 0;
        for (const auto& stage : spec.stages) {
            Stage s;
            s.name = stage.name;
            int width = 0;
            double longest = 0;
            for (const auto& t : stage.tasks) {
                if (!failed.contains(t.uid())) continue;
                const auto fp = task_footprint(t.desc, platform.node);
                if (fp.nodes_needed > platform.node_count)
                    throw Unplaceable("task " + t.uid() + " needs " + std::to_string(fp.nodes_needed) +
                                      " nodes, platform has " + std::to_string(platform.node_count));
                width += fp.nodes_needed;
                longest = std::max(longest, t.desc.expected_runtime_s.value_or(0.0));
                s.tasks.emplace_back(t.desc);
                plan.task_attempts[t.uid()] = plan.attempt;
            }
            if (s.tasks.empty()) continue;
            widest = std::max(widest, width);
            pipeline_runtime += longest;
            out.stages.push_back(std::move(s));
        }
        if (out.stages.empty()) continue;
        total_nodes += widest;
        longest_pipeline = std::max(longest_pipeline, pipeline_runtime);
        plan.workflows.push_back(std::move(out));
    }

    int nodes = total_nodes;
    if (original.nodes > 0) nodes = std::min(nodes, original.nodes);
    nodes = std::min(nodes, platform.node_count);
    double walltime = max_walltime_for(platform.policy, nodes);
    if (original.walltime_s > 0) walltime = std::min(walltime, original.walltime_s);
    plan.allocation = {nodes, walltime};
    plan.estimated_runtime_s = platform.bootstrap_overhead_s + longest_pipeline;
    plan.feasible = plan.estimated_runtime_s <= walltime;
    return plan;
}

std::string dump_plan_sidecar(const ResubmissionPlan& plan) {
    detail::json j = {
        {"attempt", plan.attempt},
        {"parent_log", plan.parent_log},
        {"allocation", {{"nodes", plan.allocation.nodes}, {"walltime_s", plan.allocation.walltime_s}}},
    };
    return j.dump(2) + "\n";
}

RetryOutcome retry_loop(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                        const AllocationRequest& initial, const JobRunner& runner, int max_attempts,
                        bool retry_canceled) {
    if (max_attempts < 1) throw ConfigError("max_attempts must be ≥ 1");
    RetryOutcome out;
    std::vector<WorkflowSpec> current = specs;
    AllocationRequest allocation = initial;
    for (int attempt = 1;; ++attempt) {
        out.logs.push_back(runner(current, allocation, attempt));
        auto records = collect_failures(out.logs.back(), current, true);
        std::vector<FailureRecord> retryable;
        for (auto& r : records) {
            if (r.kind == FailureKind::Canceled && !retry_canceled)
                out.unresolved.push_back(std::move(r));
            else
                retryable.push_back(std::move(r));
        }
        if (retryable.empty()) break;
        if (attempt >= max_attempts) {
            out.unresolved.insert(out.unresolved.end(), retryable.begin(), retryable.end());
            break;
        }
        auto plan = plan_resubmission(retryable, current, platform, initial, attempt,
                                      "attempt-" + std::to_string(attempt) + ".events.jsonl");
        current = plan.workflows;
        allocation = plan.allocation;
        out.plans.push_back(std::move(plan));
    }
    return out;
}

RetryOutcome retry_loop_simulated(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                                  const SimConfig& config, int max_attempts, bool retry_canceled) {
    const JobRunner runner = [&](const std::vector<WorkflowSpec>& wf, const AllocationRequest& alloc,
                                 int attempt) {
        SimConfig c = config;
        c.allocation_nodes = alloc.nodes;
        c.walltime_s = alloc.walltime_s;
        c.attempt = attempt;
        if (attempt > 1) c.failures = config.failures.without_node_faults();
        return run_simulated(wf, platform, c);
    };
    return retry_loop(specs, platform, {config.allocation_nodes, config.walltime_s}, runner, max_attempts,
                      retry_canceled);
}

} // namespace ensemblekit
