#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ensemblekit {

enum class EventKind {
    JobStart,
    BootstrapDone,
    TaskScheduled,
    TaskLaunched,
    TaskDone,
    TaskFailed,
    TaskCanceled,
    NodeFailed,
    JobEnd,
};

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view text);
bool is_task_terminal(EventKind kind) noexcept;

struct Event {
    double ts = 0;
    EventKind kind = EventKind::JobStart;
    std::optional<std::string> task_uid;
    std::optional<std::vector<int>> node_ids;
    std::string detail;

    bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;

/// One JSON object per line with keys ts, kind, task_uid, node_ids, detail.
std::string dump_event(const Event& event);
std::string dump_event_log(const EventLog& log);
EventLog parse_event_log(const std::string& text, const std::string& source = "<log>");
EventLog load_event_log(const std::filesystem::path& path);
void save_event_log(const EventLog& log, const std::filesystem::path& path);

bool has_job_end(const EventLog& log) noexcept;
/// Throws IncompleteLog unless the log ends with JOB_END.
void require_complete(const EventLog& log);

/// `key=value` tokens of an event detail; bare words map to "".
std::map<std::string, std::string> parse_detail(std::string_view detail);

/// Allocation facts the engine stamps into the JOB_START detail so a log
/// can be analysed without its original configuration.
struct JobInfo {
    std::string platform;
    int nodes = 0;
    int cores_per_node = 0;   // usable cores
    int gpus_per_node = 0;
    double walltime_s = 0;
    int attempt = 1;

    bool operator==(const JobInfo&) const = default;
};

std::string format_job_info(const JobInfo& info);
std::optional<JobInfo> job_info(const EventLog& log);

/// Slot reservation recorded in the TASK_SCHEDULED detail ("cores=N gpus=M").
struct SlotDetail {
    int cores = 0;
    int gpus = 0;
};

std::string format_slot_detail(const SlotDetail& slots);
std::optional<SlotDetail> parse_slot_detail(std::string_view detail);

/// Renders a double with the shortest text that reads back identically.
std::string format_double(double value);

} // namespace ensemblekit
