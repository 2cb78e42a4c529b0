#pragma once

// Brute-force reference implementations and random generators used by the
// unit tests and the acceptance suite. Deliberately naive: every quantity is
// recomputed from scratch per instant.

#include "ensemblekit/event_log.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/pst.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ensemblekit::testing {

/// Per-instant recount: at every distinct timestamp, replays the whole log
/// prefix and counts pending/running tasks; keeps the first instant and
/// every instant where a count changes.
ConcurrencySeries brute_force_concurrency(const EventLog& log);

/// Integrates busy node/core/GPU counts piecewise between consecutive
/// distinct timestamps, recounting holders for each piece.
UtilizationStack brute_force_utilization(const EventLog& log, const PlatformConfig& platform,
                                         int allocation_nodes);

struct RandomLogParams {
    int allocation_nodes = 4;
    int max_events = 100;
    int max_tasks = 30;
    bool integer_times = true;   // encourages simultaneous events
};

/// A well-formed complete log: JOB_START, BOOTSTRAP_DONE, then task
/// lifecycles (some canceled before or after launch, some failed), JOB_END.
EventLog random_log(std::mt19937_64& rng, const PlatformConfig& platform, const RandomLogParams& params);

/// Small platform used by the random generators: 4 usable cores, 2 GPUs.
PlatformConfig small_platform(int node_count);

/// Random pipelines of small tasks, each fitting one node of `node`.
std::vector<WorkflowSpec> random_workflows(std::mt19937_64& rng, int pipelines, int max_stages,
                                           int max_tasks_per_stage, const NodeSpec& node,
                                           const std::string& prefix = "t");

bool near(double a, double b, double tol = 1e-9);
bool same_stack(const UtilizationStack& a, const UtilizationStack& b, double tol = 1e-9);

/// Checks the PST ordering rules against a simulator log: per pipeline, no
/// task of stage k+1 is scheduled before every task of stage k has a
/// terminal event. Returns an empty string or a description of the breach.
std::string check_stage_order(const EventLog& log, const std::vector<WorkflowSpec>& specs);

/// Replays the reservations implied by each scheduled task's description
/// (full nodes first, remainder on the last listed node) and reports the
/// first event at which a node is oversubscribed or out of range, or "".
std::string check_no_oversubscription(const EventLog& log, const std::vector<WorkflowSpec>& specs,
                                      const NodeSpec& node, int allocation_nodes);

} // namespace ensemblekit::testing
