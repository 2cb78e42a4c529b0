#include "ensemblekit/sim_engine.hpp"

#include "ensemblekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ensemblekit {

int priority(SimEventKind kind) noexcept {
    switch (kind) {
    case SimEventKind::Bootstrap: return 0;
    case SimEventKind::TaskComplete: return 1;
    case SimEventKind::TaskFault:
    case SimEventKind::NodeFault: return 2;
    case SimEventKind::TaskLaunch: return 3;
    case SimEventKind::Walltime: return 4;
    }
    return 5;
}

bool SimEventQueue::Later::operator()(const SimEvent& a, const SimEvent& b) const noexcept {
    if (a.ts != b.ts) return a.ts > b.ts;
    if (priority(a.kind) != priority(b.kind)) return priority(a.kind) > priority(b.kind);
    if (a.uid != b.uid) return a.uid > b.uid;
    return a.seq > b.seq;
}

void SimEventQueue::push(SimEvent event) {
    event.seq = next_seq_++;
    heap_.push(std::move(event));
}

SimEvent SimEventQueue::pop() {
    SimEvent e = heap_.top();
    heap_.pop();
    return e;
}

SimulatedJob::SimulatedJob(std::vector<WorkflowSpec> specs, PlatformConfig platform, SimConfig config)
    : specs_(std::move(specs)),
      platform_(std::move(platform)),
      config_(std::move(config)),
      table_(platform_.node, std::max(1, config_.allocation_nodes)) {
    if (auto v = validate_platform(platform_); !v.empty())
        throw ValidationError("platform " + platform_.name + ": " + v.front());
    if (auto v = validate_workflows(specs_); !v.ok()) {
        std::string msg = "workflow:";
        for (const auto& s : v.violations) msg += "\n  " + s;
        throw ValidationError(msg);
    }
    if (config_.allocation_nodes < 1 || config_.allocation_nodes > platform_.node_count)
        throw ConfigError("allocation of " + std::to_string(config_.allocation_nodes) +
                          " nodes does not fit platform " + platform_.name + " (" +
                          std::to_string(platform_.node_count) + " nodes)");
    if (!(config_.walltime_s > 0)) throw ConfigError("walltime must be > 0");
    const double limit = max_walltime_for(platform_.policy, config_.allocation_nodes);
    if (config_.walltime_s > limit)
        throw PolicyViolation("walltime " + format_double(config_.walltime_s) + " s exceeds the " +
                              format_double(limit) + " s limit for " +
                              std::to_string(config_.allocation_nodes) + " nodes");
    if (config_.launch_delay_s < 0 || !(config_.launch_rate_cap > 0) ||
        config_.dead_node_failure_latency_s < 0)
        throw ConfigError("launch delay and dead-node latency must be ≥ 0, launch rate cap > 0");
    const double p = config_.failures.random_task_fault_probability;
    if (!(p >= 0 && p <= 1)) throw ConfigError("random task fault probability must be in [0, 1]");
    config_.runtime.validate();

    for (std::size_t pi = 0; pi < specs_.size(); ++pi)
        for (std::size_t si = 0; si < specs_[pi].stages.size(); ++si)
            for (std::size_t ti = 0; ti < specs_[pi].stages[si].tasks.size(); ++ti) {
                auto& t = specs_[pi].stages[si].tasks[ti];
                t.desc.stage_name = specs_[pi].stages[si].name;
                const auto fp = task_footprint(t.desc, platform_.node);
                if (fp.nodes_needed > config_.allocation_nodes)
                    throw Unplaceable("task " + t.uid() + " needs " + std::to_string(fp.nodes_needed) +
                                      " nodes, allocation has " +
                                      std::to_string(config_.allocation_nodes));
                TaskRuntime r;
                r.runtime_s = config_.runtime.sample(t.desc);
                if (!(r.runtime_s > 0) || !std::isfinite(r.runtime_s))
                    throw ConfigError("task " + t.uid() + " has non-positive runtime");
                index_.emplace(t.uid(), refs_.size());
                refs_.push_back({pi, si, ti});
                rt_.push_back(std::move(r));
            }
    live_tasks_ = refs_.size();
    remaining_in_stage_.assign(specs_.size(), 0);
    holders_.resize(config_.allocation_nodes);
    dead_.assign(config_.allocation_nodes, false);

    for (const auto& f : config_.failures.faults) {
        if (f.kind == Fault::Kind::TaskFault) {
            if (!(f.at_fraction > 0 && f.at_fraction <= 1))
                throw ConfigError("task fault for " + f.uid + ": fraction must be in (0, 1]");
            task_fault_fraction_[f.uid] = f.at_fraction;
            continue;
        }
        if (f.node_id < 0 || f.node_id >= config_.allocation_nodes)
            throw ConfigError("node fault on node " + std::to_string(f.node_id) +
                              " outside the allocation");
        if (!(f.at_ts >= 0 && f.at_ts <= config_.walltime_s))
            throw ConfigError("node fault at " + format_double(f.at_ts) + " s is outside the walltime");
        SimEvent e;
        e.ts = f.at_ts;
        e.kind = SimEventKind::NodeFault;
        e.node_id = f.node_id;
        e.persistent = f.kind == Fault::Kind::PersistentNode;
        events_.push(std::move(e));
    }

    emit(EventKind::JobStart, std::nullopt, std::nullopt,
         format_job_info({platform_.name, config_.allocation_nodes, usable_cores(platform_.node),
                          platform_.node.gpus, config_.walltime_s, config_.attempt}));
    SimEvent boot;
    boot.ts = platform_.bootstrap_overhead_s;
    boot.kind = SimEventKind::Bootstrap;
    events_.push(std::move(boot));
    SimEvent wall;
    wall.ts = config_.walltime_s;
    wall.kind = SimEventKind::Walltime;
    events_.push(std::move(wall));
}

Task& SimulatedJob::task_at(std::size_t i) {
    const auto& r = refs_[i];
    return specs_[r.pipeline].stages[r.stage].tasks[r.index];
}

const Task& SimulatedJob::task(std::string_view uid) const {
    auto it = index_.find(std::string(uid));
    if (it == index_.end()) throw ConfigError("unknown task " + std::string(uid));
    const auto& r = refs_[it->second];
    return specs_[r.pipeline].stages[r.stage].tasks[r.index];
}

void SimulatedJob::emit(EventKind kind, const std::optional<std::string>& uid,
                        std::optional<std::vector<int>> nodes, std::string detail) {
    log_.push_back({now_, kind, uid, std::move(nodes), std::move(detail)});
}

bool SimulatedJob::step() {
    while (!finished_ && !events_.empty()) {
        SimEvent e = events_.pop();
        std::size_t i = 0;
        const bool task_event = e.kind == SimEventKind::TaskComplete ||
                                e.kind == SimEventKind::TaskFault || e.kind == SimEventKind::TaskLaunch;
        if (task_event) {
            i = index_.at(e.uid);
            if (rt_[i].token != e.token) continue;
        }
        now_ = e.ts;
        switch (e.kind) {
        case SimEventKind::Bootstrap: handle_bootstrap(); break;
        case SimEventKind::TaskComplete: end_task(i, TaskState::Done, EventKind::TaskDone, ""); break;
        case SimEventKind::TaskFault: end_task(i, TaskState::Failed, EventKind::TaskFailed, e.detail); break;
        case SimEventKind::NodeFault: handle_node_fault(e); break;
        case SimEventKind::TaskLaunch: handle_launch(i); break;
        case SimEventKind::Walltime: handle_walltime(); return true;
        }
        drain();
        maybe_finish();
        return true;
    }
    return false;
}

void SimulatedJob::run() {
    while (step()) {
    }
}

void SimulatedJob::activate(std::size_t p) {
    const auto& spec = specs_[p];
    const auto idx = active_stage_index(spec);
    if (idx == spec.stages.size()) {
        remaining_in_stage_[p] = 0;
        return;
    }
    std::size_t open = 0;
    for (const auto& t : spec.stages[idx].tasks)
        if (!is_terminal(t.state)) ++open;
    remaining_in_stage_[p] = open;
    for (const auto& uid : frontier(spec))
        queue_.push_back(make_slot_request(spec.find(uid)->desc, platform_.node));
}

void SimulatedJob::drain() {
    for (auto& p : drain_queue(table_, queue_)) {
        const std::size_t i = index_.at(p.uid);
        Task& t = task_at(i);
        transition_task(t, TaskState::Scheduled, now_);
        t.node_ids = p.node_ids();
        for (int n : t.node_ids) holders_[n].push_back(i);
        emit(EventKind::TaskScheduled, t.uid(), t.node_ids,
             format_slot_detail({p.total_cores(), p.total_gpus()}));

        double launch = std::max(now_ + config_.launch_delay_s, next_launch_ts_);
        if (std::isfinite(config_.launch_rate_cap)) next_launch_ts_ = launch + 1.0 / config_.launch_rate_cap;
        SimEvent e;
        e.ts = launch;
        e.kind = SimEventKind::TaskLaunch;
        e.uid = t.uid();
        e.token = rt_[i].token;
        events_.push(std::move(e));
        rt_[i].placement = std::move(p);
    }
}

void SimulatedJob::handle_bootstrap() {
    emit(EventKind::BootstrapDone, std::nullopt, std::nullopt, "");
    for (std::size_t p = 0; p < specs_.size(); ++p) activate(p);
}

void SimulatedJob::handle_launch(std::size_t i) {
    Task& t = task_at(i);
    auto& r = rt_[i];
    transition_task(t, TaskState::Running, now_);
    emit(EventKind::TaskLaunched, t.uid(), t.node_ids, "");
    if (r.doomed) {
        end_task(i, TaskState::Failed, EventKind::TaskFailed, *r.doomed);
        return;
    }

    SimEvent e;
    e.uid = t.uid();
    e.token = r.token;
    e.kind = SimEventKind::TaskComplete;
    e.ts = now_ + r.runtime_s;

    auto fail_at = [&](double ts, std::string detail) {
        if (ts <= e.ts && (e.kind == SimEventKind::TaskComplete || ts < e.ts)) {
            e.ts = ts;
            e.kind = SimEventKind::TaskFault;
            e.detail = std::move(detail);
        }
    };
    for (int n : t.node_ids)
        if (dead_[n]) {
            fail_at(now_ + config_.dead_node_failure_latency_s, "node_failure node=" + std::to_string(n));
            break;
        }
    if (auto it = task_fault_fraction_.find(t.uid()); it != task_fault_fraction_.end())
        fail_at(now_ + it->second * r.runtime_s, "task_fault fraction=" + format_double(it->second));
    if (const double p = config_.failures.random_task_fault_probability; p > 0) {
        std::mt19937_64 gen(mix_seed(config_.failures.seed,
                                     t.uid() + "#" + std::to_string(config_.attempt)));
        if (unit_interval(gen()) < p) {
            // (0, 1]: a fault never fires at the launch instant itself.
            const double fraction = 1.0 - unit_interval(gen());
            fail_at(now_ + fraction * r.runtime_s, "task_fault fraction=" + format_double(fraction));
        }
    }
    events_.push(std::move(e));
}

void SimulatedJob::handle_node_fault(const SimEvent& e) {
    const int n = e.node_id;
    emit(EventKind::NodeFailed, std::nullopt, std::vector<int>{n}, e.persistent ? "persistent" : "transient");
    if (e.persistent) {
        dead_[n] = true;
        if (config_.exclude_failed_nodes) table_.mark_node_health(n, false);
    }
    auto holders = holders_[n];
    std::sort(holders.begin(), holders.end());
    const std::string detail = "node_failure node=" + std::to_string(n);
    for (std::size_t i : holders) {
        const Task& t = task_at(i);
        if (t.state == TaskState::Running)
            end_task(i, TaskState::Failed, EventKind::TaskFailed, detail);
        else if (t.state == TaskState::Scheduled)
            rt_[i].doomed = detail;
    }
}

void SimulatedJob::end_task(std::size_t i, TaskState to, EventKind kind, std::string detail) {
    Task& t = task_at(i);
    auto& r = rt_[i];
    transition_task(t, to, now_);
    emit(kind, t.uid(), t.node_ids.empty() ? std::nullopt : std::optional(t.node_ids), std::move(detail));
    if (r.placement) {
        table_.release(*r.placement);
        r.placement.reset();
        for (int n : t.node_ids) std::erase(holders_[n], i);
    }
    ++r.token;
    on_terminal(i);
}

void SimulatedJob::on_terminal(std::size_t i) {
    --live_tasks_;
    const std::size_t p = refs_[i].pipeline;
    if (remaining_in_stage_[p] > 0 && --remaining_in_stage_[p] == 0) activate(p);
}

void SimulatedJob::maybe_finish() {
    if (!finished_ && live_tasks_ == 0) finish();
}

void SimulatedJob::finish() {
    emit(EventKind::JobEnd, std::nullopt, std::nullopt, "");
    finished_ = true;
    events_ = SimEventQueue{};
}

void SimulatedJob::handle_walltime() {
    // Nothing is activated from here on; every open task is canceled.
    std::fill(remaining_in_stage_.begin(), remaining_in_stage_.end(), 0);
    queue_.clear();
    for (std::size_t i = 0; i < refs_.size(); ++i)
        if (!is_terminal(task_at(i).state))
            end_task(i, TaskState::Canceled, EventKind::TaskCanceled, "walltime");
    finish();
}

EventLog run_simulated(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                       const SimConfig& config) {
    SimulatedJob job(specs, platform, config);
    job.run();
    return job.log();
}

} // namespace ensemblekit
