#pragma once

#include "ensemblekit/event_log.hpp"
#include "ensemblekit/platform.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ensemblekit {

/// Seconds-weighted account of one resource unit (nodes, cores or GPUs).
/// ovh + busy + idle == capacity.
struct UnitAccount {
    double capacity = 0;
    double ovh = 0;
    double busy = 0;
    double idle = 0;
    double utilization_fraction = 0;   // busy / capacity

    bool operator==(const UnitAccount&) const = default;
};

struct UtilizationStack {
    int allocation_nodes = 0;
    double job_runtime_s = 0;   // ts(JOB_END)
    double ovh_s = 0;           // ts(BOOTSTRAP_DONE)
    double ttx_s = 0;           // job_runtime_s - ovh_s
    UnitAccount nodes;          // node-seconds
    UnitAccount cores;          // usable-core-seconds
    UnitAccount gpus;           // GPU-seconds

    bool operator==(const UtilizationStack&) const = default;
};

/// Busy time runs from TASK_LAUNCHED to the task's terminal event. Node
/// busy time is the per-node union of those intervals; core and GPU busy
/// time use the reservation recorded at scheduling. Throws IncompleteLog
/// or MalformedLog.
UtilizationStack compute_utilization(const EventLog& log, const PlatformConfig& platform,
                                     int allocation_nodes);

struct ConcurrencyPoint {
    double ts = 0;
    int n_scheduled_pending_launch = 0;
    int n_running = 0;

    bool operator==(const ConcurrencyPoint&) const = default;
};

/// Step function of task counts after all events at each instant. The
/// first instant is always present; later ones only where a count changes.
struct ConcurrencySeries {
    std::vector<ConcurrencyPoint> points;

    int max_running() const noexcept;
    bool operator==(const ConcurrencySeries&) const = default;
};

/// Throws MalformedLog when a task's events are out of order.
ConcurrencySeries concurrency_series(const EventLog& log);

/// Rates over the initial ramp: from the first event up to the last
/// instant at which the running count rose before it first fell. A rate
/// is empty when its window has fewer than two events or zero length.
struct RateSummary {
    std::optional<double> scheduling_rate_tasks_per_s;
    std::optional<double> launching_rate_tasks_per_s;
    double ramp_start_ts = 0;
    double ramp_end_ts = 0;

    bool operator==(const RateSummary&) const = default;
};

/// Throws InsufficientData with fewer than two TASK_SCHEDULED events.
RateSummary throughput(const EventLog& log);

enum class ExportFormat { Csv, Json };

ExportFormat parse_export_format(const std::string& text);

std::string render(const UtilizationStack& stack, ExportFormat format);
std::string render(const ConcurrencySeries& series, ExportFormat format);
std::string render(const RateSummary& rates, ExportFormat format);

UtilizationStack parse_utilization(const std::string& text, ExportFormat format);
ConcurrencySeries parse_concurrency(const std::string& text, ExportFormat format);
RateSummary parse_rates(const std::string& text, ExportFormat format);

template <class T>
void export_metrics(const T& value, ExportFormat format, const std::filesystem::path& path);

} // namespace ensemblekit
