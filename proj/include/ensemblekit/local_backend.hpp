#pragma once

#include "ensemblekit/event_log.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/pst.hpp"

#include <filesystem>
#include <vector>

namespace ensemblekit {

struct LocalConfig {
    int max_parallel = 1;
    /// Task stdout/stderr go to `<out_dir>/<uid>.out` and `.err`; tasks
    /// run with `out_dir` as working directory.
    std::filesystem::path out_dir;
    int attempt = 1;
    double poll_interval_s = 0.002;
};

/// Runs every task as a real subprocess (`/bin/sh -c`, pre_exec commands
/// first) with at most `max_parallel` at once, honoring stage order.
/// Non-zero exits and missing executables become TASK_FAILED; timestamps
/// are wall-clock seconds from the start. Throws IoError if `out_dir`
/// cannot be used.
EventLog run_local(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                   const LocalConfig& config);

/// Shell line the backend executes for a task.
std::string shell_command(const TaskDescription& desc);

} // namespace ensemblekit
