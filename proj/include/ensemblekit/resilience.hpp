#pragma once

#include "ensemblekit/event_log.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/pst.hpp"
#include "ensemblekit/sim_engine.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ensemblekit {

enum class FailureKind { NodeFailure, TaskFault, Canceled };

std::string_view to_string(FailureKind kind) noexcept;

struct FailureRecord {
    std::string uid;
    std::string pipeline;
    std::string stage_name;
    std::size_t stage_index = 0;
    FailureKind kind = FailureKind::TaskFault;
    double ts = 0;

    bool operator==(const FailureRecord&) const = default;
};

/// One record per task whose terminal event is TASK_FAILED, plus
/// TASK_CANCELED ones when `include_canceled` is set, in log order.
/// Throws IncompleteLog without JOB_END and MalformedLog for unknown uids.
std::vector<FailureRecord> collect_failures(const EventLog& log, const std::vector<WorkflowSpec>& specs,
                                            bool include_canceled);

struct AllocationRequest {
    int nodes = 0;
    double walltime_s = 0;

    bool operator==(const AllocationRequest&) const = default;
};

struct ResubmissionPlan {
    /// Failed tasks only, regrouped under their original stages, in the
    /// original stage order. Tasks are back in state NEW.
    std::vector<WorkflowSpec> workflows;
    AllocationRequest allocation;
    /// Attempt number each task will run as.
    std::map<std::string, int> task_attempts;
    int attempt = 2;
    std::string parent_log;
    /// Bootstrap plus, per pipeline, the sum over stages of the longest
    /// expected runtime. Tasks without a hint contribute nothing.
    double estimated_runtime_s = 0;
    bool feasible = true;
};

/// Sizes the retry job for full concurrency of the widest failed stage
/// (summed across pipelines), never above the original allocation, and
/// requests the policy walltime for that size capped by the original
/// walltime. Throws EmptyPlan or Unplaceable.
ResubmissionPlan plan_resubmission(const std::vector<FailureRecord>& records,
                                   const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                                   const AllocationRequest& original, int parent_attempt = 1,
                                   std::string parent_log = {});

/// Sidecar document {attempt, parent_log, allocation:{nodes, walltime_s}}.
std::string dump_plan_sidecar(const ResubmissionPlan& plan);

using JobRunner = std::function<EventLog(const std::vector<WorkflowSpec>& specs,
                                         const AllocationRequest& allocation, int attempt)>;

struct RetryOutcome {
    std::vector<EventLog> logs;               // one per attempt
    std::vector<ResubmissionPlan> plans;      // plans[k] feeds attempt k + 2
    std::vector<FailureRecord> unresolved;    // not DONE after the last attempt
};

/// Runs attempt 1 with `initial`, then keeps resubmitting retryable
/// failures as fresh jobs until none remain or `max_attempts` is reached.
/// Canceled tasks are retried only with `retry_canceled`; otherwise they
/// go straight to `unresolved`.
RetryOutcome retry_loop(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                        const AllocationRequest& initial, const JobRunner& runner, int max_attempts,
                        bool retry_canceled = false);

/// retry_loop over the simulator. Later attempts drop node faults from the
/// failure model (fresh nodes) and keep task faults.
RetryOutcome retry_loop_simulated(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                                  const SimConfig& config, int max_attempts, bool retry_canceled = false);

} // namespace ensemblekit
