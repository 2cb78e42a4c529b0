#include "ensemblekit/local_backend.hpp"

#include "ensemblekit/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fcntl.h>
#include <sys/wait.h>
#include <thread>
#include <unordered_map>
#include <unistd.h>

namespace ensemblekit {

namespace {

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

bool resolvable(const std::string& exe) {
    if (exe.find('/') != std::string::npos) return ::access(exe.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
        auto end = dirs.find(':', start);
        if (end == std::string::npos) end = dirs.size();
        std::string dir = dirs.substr(start, end - start);
        if (dir.empty()) dir = ".";
        if (::access((dir + "/" + exe).c_str(), X_OK) == 0) return true;
        start = end + 1;
    }
    return false;
}

struct Running {
    std::size_t task;
    pid_t pid;
};

class LocalJob {
public:
    LocalJob(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform, const LocalConfig& cfg)
        : specs_(specs), platform_(platform), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

    EventLog run();

private:
    double now() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    void emit(EventKind kind, std::optional<std::string> uid, std::optional<std::vector<int>> nodes,
              std::string detail) {
        log_.push_back({now(), kind, std::move(uid), std::move(nodes), std::move(detail)});
    }
    void activate(std::size_t p);
    void launch(std::size_t i);
    void finish_task(std::size_t i, TaskState to, EventKind kind, std::string detail);
    bool reap();

    std::vector<WorkflowSpec> specs_;
    PlatformConfig platform_;
    LocalConfig cfg_;
    std::chrono::steady_clock::time_point start_;
    EventLog log_;
    std::vector<std::pair<std::size_t, std::size_t>> stage_of_;   // pipeline, stage
    std::vector<Task*> tasks_;
    std::unordered_map<std::string, std::size_t> index_;
    std::deque<std::size_t> queue_;
    std::vector<std::size_t> remaining_;
    std::vector<Running> running_;
    std::size_t live_ = 0;
};

void LocalJob::activate(std::size_t p) {
    const auto& spec = specs_[p];
    const auto idx = active_stage_index(spec);
    remaining_[p] = 0;
    if (idx == spec.stages.size()) return;
    for (const auto& t : spec.stages[idx].tasks)
        if (!is_terminal(t.state)) ++remaining_[p];
    for (const auto& uid : frontier(spec)) queue_.push_back(index_.at(uid));
}

void LocalJob::finish_task(std::size_t i, TaskState to, EventKind kind, std::string detail) {
    Task& t = *tasks_[i];
    transition_task(t, to, now());
    emit(kind, t.uid(), t.node_ids, std::move(detail));
    --live_;
    const auto p = stage_of_[i].first;
    if (remaining_[p] > 0 && --remaining_[p] == 0) activate(p);
}

void LocalJob::launch(std::size_t i) {
    Task& t = *tasks_[i];
    const double ts = now();
    transition_task(t, TaskState::Scheduled, ts);
    t.node_ids = {0};
    emit(EventKind::TaskScheduled, t.uid(), t.node_ids, format_slot_detail({1, 0}));

    if (!resolvable(t.desc.executable)) {
        transition_task(t, TaskState::Running, now());
        emit(EventKind::TaskLaunched, t.uid(), t.node_ids, "");
        finish_task(i, TaskState::Failed, EventKind::TaskFailed,
                    "spawn_error executable not found: " + t.desc.executable);
        return;
    }

    const std::string script = shell_command(t.desc);
    const std::string out_path = (cfg_.out_dir / (t.uid() + ".out")).string();
    const std::string err_path = (cfg_.out_dir / (t.uid() + ".err")).string();
    const std::string work = cfg_.out_dir.string();

    const pid_t pid = ::fork();
    if (pid < 0) {
        transition_task(t, TaskState::Running, now());
        emit(EventKind::TaskLaunched, t.uid(), t.node_ids, "");
        finish_task(i, TaskState::Failed, EventKind::TaskFailed, "spawn_error fork failed");
        return;
    }
    if (pid == 0) {
        if (::chdir(work.c_str()) != 0) ::_exit(126);
        const int out = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int err = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out < 0 || err < 0) ::_exit(126);
        ::dup2(out, STDOUT_FILENO);
        ::dup2(err, STDERR_FILENO);
        ::close(out);
        ::close(err);
        ::execl("/bin/sh", "sh", "-c", script.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    transition_task(t, TaskState::Running, now());
    emit(EventKind::TaskLaunched, t.uid(), t.node_ids, "pid=" + std::to_string(pid));
    running_.push_back({i, pid});
}

bool LocalJob::reap() {
    bool any = false;
    for (std::size_t k = 0; k < running_.size();) {
        int status = 0;
        const pid_t r = ::waitpid(running_[k].pid, &status, WNOHANG);
        if (r == 0) {
            ++k;
            continue;
        }
        const std::size_t i = running_[k].task;
        running_.erase(running_.begin() + static_cast<std::ptrdiff_t>(k));
        any = true;
        if (r < 0) {
            finish_task(i, TaskState::Failed, EventKind::TaskFailed, "task_fault wait_failed");
        } else if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
            finish_task(i, TaskState::Done, EventKind::TaskDone, "exit_code=0");
        } else if (WIFEXITED(status)) {
            finish_task(i, TaskState::Failed, EventKind::TaskFailed,
                        "task_fault exit_code=" + std::to_string(WEXITSTATUS(status)));
        } else {
            finish_task(i, TaskState::Failed, EventKind::TaskFailed,
                        "task_fault signal=" + std::to_string(WTERMSIG(status)));
        }
    }
    return any;
}

EventLog LocalJob::run() {
    if (auto v = validate_workflows(specs_); !v.ok()) {
        std::string msg = "workflow:";
        for (const auto& s : v.violations) msg += "\n  " + s;
        throw ValidationError(msg);
    }
    if (cfg_.max_parallel < 1) throw ConfigError("max_parallel must be ≥ 1");
    std::error_code ec;
    std::filesystem::create_directories(cfg_.out_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg_.out_dir))
        throw IoError("cannot create output directory " + cfg_.out_dir.string());
    if (::access(cfg_.out_dir.c_str(), W_OK) != 0)
        throw IoError("output directory " + cfg_.out_dir.string() + " is not writable");
    cfg_.out_dir = std::filesystem::absolute(cfg_.out_dir);

    for (std::size_t p = 0; p < specs_.size(); ++p)
        for (std::size_t s = 0; s < specs_[p].stages.size(); ++s)
            for (auto& t : specs_[p].stages[s].tasks) {
                t.desc.stage_name = specs_[p].stages[s].name;
                stage_of_.emplace_back(p, s);
                index_.emplace(t.uid(), tasks_.size());
                tasks_.push_back(&t);
            }
    live_ = tasks_.size();
    remaining_.assign(specs_.size(), 0);

    const int cores = std::max(usable_cores(platform_.node), cfg_.max_parallel);
    emit(EventKind::JobStart, std::nullopt, std::nullopt,
         format_job_info({platform_.name, 1, cores, platform_.node.gpus, 0, cfg_.attempt}));
    emit(EventKind::BootstrapDone, std::nullopt, std::nullopt, "");
    for (std::size_t p = 0; p < specs_.size(); ++p) activate(p);

    const auto poll = std::chrono::duration<double>(cfg_.poll_interval_s);
    while (live_ > 0) {
        while (!queue_.empty() && static_cast<int>(running_.size()) < cfg_.max_parallel) {
            const auto i = queue_.front();
            queue_.pop_front();
            launch(i);
        }
        if (running_.empty() && queue_.empty()) break;
        if (!reap()) std::this_thread::sleep_for(poll);
    }
    emit(EventKind::JobEnd, std::nullopt, std::nullopt, "");
    return log_;
}

} // namespace

std::string shell_command(const TaskDescription& desc) {
    std::string script;
    for (const auto& pre : desc.pre_exec) script += pre + " && ";
    script += "exec " + quote(desc.executable);
    for (const auto& a : desc.arguments) script += " " + quote(a);
    return script;
}

EventLog run_local(const std::vector<WorkflowSpec>& specs, const PlatformConfig& platform,
                   const LocalConfig& config) {
    return LocalJob(specs, platform, config).run();
}

} // namespace ensemblekit
