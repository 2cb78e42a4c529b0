#pragma once

#include "ensemblekit/event_log.hpp"
#include "ensemblekit/models.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/pst.hpp"
#include "ensemblekit/scheduler.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

namespace ensemblekit {

/// Knobs of one simulated batch job.
struct SimConfig {
    int allocation_nodes = 1;
    double walltime_s = 3600;
    RuntimeModel runtime;
    FailureModel failures;
    /// Delay between TASK_SCHEDULED and TASK_LAUNCHED.
    double launch_delay_s = 0;
    /// Global launches per second; infinity means unlimited.
    double launch_rate_cap = std::numeric_limits<double>::infinity();
    /// A task launched onto a dead node fails this long after launch.
    double dead_node_failure_latency_s = 60;
    /// Exclude a persistently failed node from later placements. Off by
    /// default: the pilot does not learn about silent node faults.
    bool exclude_failed_nodes = false;
    int attempt = 1;
};

/// Internal simulator events. Simultaneous events are ordered by
/// (ts, priority, uid, insertion), with priority
/// bootstrap < completion < failure < launch < walltime.
enum class SimEventKind { Bootstrap, TaskComplete, TaskFault, NodeFault, TaskLaunch, Walltime };

int priority(SimEventKind kind) noexcept;

struct SimEvent {
    double ts = 0;
    SimEventKind kind = SimEventKind::Bootstrap;
    std::string uid;
    std::uint64_t seq = 0;
    std::uint64_t token = 0;   // stale task events are dropped
    int node_id = -1;
    bool persistent = false;
    std::string detail;
};

class SimEventQueue {
public:
    void push(SimEvent event);
    SimEvent pop();
    const SimEvent& top() const { return heap_.top(); }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }

private:
    struct Later {
        bool operator()(const SimEvent& a, const SimEvent& b) const noexcept;
    };
    std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

/// One allocation driven by a discrete-event loop. Construction validates
/// the inputs and records JOB_START; `step()` applies one event.
class SimulatedJob {
public:
    SimulatedJob(std::vector<WorkflowSpec> specs, PlatformConfig platform, SimConfig config);

    /// Applies the earliest pending event and its consequences. Returns
    /// false once the job has ended.
    bool step();
    void run();

    bool finished() const noexcept { return finished_; }
    double now() const noexcept { return now_; }
    const EventLog& log() const noexcept { return log_; }
    const SlotTable& slots() const noexcept { return table_; }
    const std::vector<WorkflowSpec>& workflows() const noexcept { return specs_; }
    const SimEventQueue& pending() const noexcept { return events_; }
    std::size_t queued() const noexcept { return queue_.size(); }
    const Task& task(std::string_view uid) const;

private:
    struct TaskRef {
        std::size_t pipeline;
        std::size_t stage;
        std::size_t index;
    };
    struct TaskRuntime {
        double runtime_s = 0;
        std::optional<Placement> placement;
        std::uint64_t token = 0;
        std::optional<std::string> doomed;   // fail at launch with this detail
    };

    Task& task_at(std::size_t i);
    void emit(EventKind kind, const std::optional<std::string>& uid,
              std::optional<std::vector<int>> nodes, std::string detail);
    void activate(std::size_t pipeline);
    void drain();
    void on_terminal(std::size_t i);
    void end_task(std::size_t i, TaskState to, EventKind kind, std::string detail);
    void maybe_finish();
    void finish();

    void handle_bootstrap();
    void handle_launch(std::size_t i);
    void handle_node_fault(const SimEvent& e);
    void handle_walltime();

    std::vector<WorkflowSpec> specs_;
    PlatformConfig platform_;
    SimConfig config_;
    SlotTable table_;
    SimEventQueue events_;
    EventLog log_;
    std::vector<TaskRef> refs_;
    std::vector<TaskRuntime> rt_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, double> task_fault_fraction_;
    std::deque<SlotRequest> queue_;
    std::vector<std::size_t> remaining_in_stage_;
    std::vector<std::vector<std::size_t>> holders_;
    std::vector<bool> dead_;
    std::size_t live_tasks_ = 0;
    double now_ = 0;
    double next_launch_ts_ = 0;
    bool finished_ = false;
};

/// Runs a whole job and returns its log. Throws PolicyViolation when the
/// walltime exceeds the policy for the allocation, ConfigError on bad input.
EventLog run_simulated(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                       const SimConfig& config);

} // namespace ensemblekit
