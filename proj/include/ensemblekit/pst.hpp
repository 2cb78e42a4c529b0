#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ensemblekit {

/// What a task needs and how to run it. `cpu_processes` is the MPI rank
/// count; each rank takes `cpu_threads_per_process` cores and
/// `gpus_per_process` GPUs.
struct TaskDescription {
    std::string uid;
    std::string executable;
    std::vector<std::string> arguments;
    std::vector<std::string> pre_exec;
    int cpu_processes = 1;
    int cpu_threads_per_process = 1;
    int gpus_per_process = 0;
    std::optional<double> expected_runtime_s;
    std::string stage_name;
    std::map<std::string, std::string> tags;

    bool operator==(const TaskDescription&) const = default;
};

enum class TaskState { New, Scheduled, Running, Done, Failed, Canceled };

std::string_view to_string(TaskState state) noexcept;
bool is_terminal(TaskState state) noexcept;

struct StateChange {
    TaskState state;
    double ts;

    bool operator==(const StateChange&) const = default;
};

/// A task description plus its execution state.
struct Task {
    TaskDescription desc;
    TaskState state = TaskState::New;
    std::vector<int> node_ids;          // set once scheduled
    std::vector<StateChange> history;   // one entry per transition

    explicit Task(TaskDescription d = {}) : desc(std::move(d)) {}
    const std::string& uid() const noexcept { return desc.uid; }
};

/// Moves `task` along one edge of NEW -> SCHEDULED -> RUNNING -> {DONE, FAILED},
/// or from any non-terminal state to CANCELED. Throws IllegalTransition otherwise.
void transition_task(Task& task, TaskState to, double ts);

enum class StageState { Pending, Active, Complete };
enum class PipelineState { Pending, Active, Complete };

/// A set of independent tasks; no ordering among them.
struct Stage {
    std::string name;
    std::vector<Task> tasks;

    StageState state() const noexcept;
};

/// A pipeline: stages run strictly in order, tasks within a stage concurrently.
struct WorkflowSpec {
    std::string name;
    std::vector<Stage> stages;

    PipelineState state() const noexcept;
    std::size_t task_count() const noexcept;

    const Task* find(std::string_view uid) const noexcept;
    Task* find(std::string_view uid) noexcept;
};

struct ValidationResult {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

ValidationResult validate_workflow(const WorkflowSpec& spec);

/// Validates every pipeline and additionally requires task uids to be
/// unique across all of them, since event logs key on uid alone.
ValidationResult validate_workflows(const std::vector<WorkflowSpec>& specs);

/// Index of the earliest stage that still has a non-terminal task, or
/// `stages.size()` when the pipeline is complete. Empty stages are skipped.
std::size_t active_stage_index(const WorkflowSpec& spec) noexcept;

/// NEW tasks of the active stage, in declaration order.
std::vector<std::string> frontier(const WorkflowSpec& spec);

/// Per-pipeline frontiers keyed by pipeline name. Pipelines whose frontier
/// is empty are omitted.
std::map<std::string, std::vector<std::string>> pipelines_frontier(
    const std::vector<WorkflowSpec>& specs);

} // namespace ensemblekit
