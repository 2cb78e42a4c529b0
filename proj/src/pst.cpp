#include "ensemblekit/pst.hpp"

#include "ensemblekit/error.hpp"

#include <set>

namespace ensemblekit {

std::string_view to_string(TaskState state) noexcept {
    switch (state) {
    case TaskState::New: return "NEW";
    case TaskState::Scheduled: return "SCHEDULED";
    case TaskState::Running: return "RUNNING";
    case TaskState::Done: return "DONE";
    case TaskState::Failed: return "FAILED";
    case TaskState::Canceled: return "CANCELED";
    }
    return "?";
}

bool is_terminal(TaskState state) noexcept {
    return state == TaskState::Done || state == TaskState::Failed ||
           state == TaskState::Canceled;
}

namespace {

bool legal_edge(TaskState from, TaskState to) noexcept {
    if (is_terminal(from)) return false;
    if (to == TaskState::Canceled) return true;
    switch (from) {
    case TaskState::New: return to == TaskState::Scheduled;
    case TaskState::Scheduled: return to == TaskState::Running;
    case TaskState::Running: return to == TaskState::Done || to == TaskState::Failed;
    default: return false;
    }
}

} // namespace

void transition_task(Task& task, TaskState to, double ts) {
    if (!legal_edge(task.state, to)) {
        throw IllegalTransition("task " + task.uid() + ": " +
                                std::string(to_string(task.state)) + " -> " +
                                std::string(to_string(to)));
    }
    task.state = to;
    task.history.push_back({to, ts});
}

StageState Stage::state() const noexcept {
    bool any_started = false;
    bool all_terminal = true;
    for (const auto& t : tasks) {
        if (t.state != TaskState::New) any_started = true;
        if (!is_terminal(t.state)) all_terminal = false;
    }
    if (all_terminal) return StageState::Complete;
    return any_started ? StageState::Active : StageState::Pending;
}

PipelineState WorkflowSpec::state() const noexcept {
    if (active_stage_index(*this) == stages.size()) return PipelineState::Complete;
    for (const auto& s : stages)
        if (s.state() != StageState::Pending) return PipelineState::Active;
    return PipelineState::Pending;
}

std::size_t WorkflowSpec::task_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.tasks.size();
    return n;
}

const Task* WorkflowSpec::find(std::string_view uid) const noexcept {
    for (const auto& s : stages)
        for (const auto& t : s.tasks)
            if (t.uid() == uid) return &t;
    return nullptr;
}

Task* WorkflowSpec::find(std::string_view uid) noexcept {
    return const_cast<Task*>(std::as_const(*this).find(uid));
}

namespace {

void check_task(const TaskDescription& d, std::vector<std::string>& out) {
    const std::string who = "task " + (d.uid.empty() ? std::string("<no uid>") : d.uid) + ": ";
    if (d.uid.empty()) out.push_back(who + "uid must be non-empty");
    if (d.executable.empty()) out.push_back(who + "executable must be non-empty");
    if (d.cpu_processes < 1) out.push_back(who + "cpu_processes must be ≥ 1");
    if (d.cpu_threads_per_process < 1) out.push_back(who + "cpu_threads_per_process must be ≥ 1");
    if (d.gpus_per_process < 0) out.push_back(who + "gpus_per_process must be ≥ 0");
    if (d.expected_runtime_s && !(*d.expected_runtime_s > 0))
        out.push_back(who + "expected_runtime_s must be > 0");
}

} // namespace

ValidationResult validate_workflow(const WorkflowSpec& spec) {
    ValidationResult result;
    auto& out = result.violations;
    if (spec.stages.empty()) out.push_back("pipeline " + spec.name + " has no stages");
    std::set<std::string> seen;
    std::set<std::string> reported;
    for (const auto& stage : spec.stages) {
        if (stage.tasks.empty()) out.push_back("empty stage " + stage.name);
        for (const auto& t : stage.tasks) {
            check_task(t.desc, out);
            if (!t.uid().empty() && !seen.insert(t.uid()).second && reported.insert(t.uid()).second)
                out.push_back("duplicate uid " + t.uid());
        }
    }
    return result;
}

ValidationResult validate_workflows(const std::vector<WorkflowSpec>& specs) {
    ValidationResult result;
    std::set<std::string> seen;
    std::set<std::string> reported;
    std::set<std::string> names;
    for (const auto& spec : specs) {
        if (!names.insert(spec.name).second)
            result.violations.push_back("duplicate pipeline name " + spec.name);
        auto one = validate_workflow(spec);
        result.violations.insert(result.violations.end(), one.violations.begin(),
                                 one.violations.end());
    }
    for (const auto& spec : specs) {
        std::set<std::string> local;
        for (const auto& stage : spec.stages)
            for (const auto& t : stage.tasks) local.insert(t.uid());
        for (const auto& uid : local)
            if (!seen.insert(uid).second && reported.insert(uid).second)
                result.violations.push_back("uid " + uid + " used by more than one pipeline");
    }
    return result;
}

std::size_t active_stage_index(const WorkflowSpec& spec) noexcept {
    for (std::size_t i = 0; i < spec.stages.size(); ++i)
        if (spec.stages[i].state() != StageState::Complete) return i;
    return spec.stages.size();
}

std::vector<std::string> frontier(const WorkflowSpec& spec) {
    std::vector<std::string> out;
    const auto idx = active_stage_index(spec);
    if (idx == spec.stages.size()) return out;
    for (const auto& t : spec.stages[idx].tasks)
        if (t.state == TaskState::New) out.push_back(t.uid());
    return out;
}

std::map<std::string, std::vector<std::string>> pipelines_frontier(
    const std::vector<WorkflowSpec>& specs) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& spec : specs) {
        auto f = frontier(spec);
        if (!f.empty()) out[spec.name] = std::move(f);
    }
    return out;
}

} // namespace ensemblekit
