#include "ensemblekit/event_log.hpp"

#include "ensemblekit/error.hpp"
#include "json_util.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace ensemblekit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kKindNames{{
    {EventKind::JobStart, "JOB_START"},
    {EventKind::BootstrapDone, "BOOTSTRAP_DONE"},
    {EventKind::TaskScheduled, "TASK_SCHEDULED"},
    {EventKind::TaskLaunched, "TASK_LAUNCHED"},
    {EventKind::TaskDone, "TASK_DONE"},
    {EventKind::TaskFailed, "TASK_FAILED"},
    {EventKind::TaskCanceled, "TASK_CANCELED"},
    {EventKind::NodeFailed, "NODE_FAILED"},
    {EventKind::JobEnd, "JOB_END"},
}};

int to_int(const std::string& s, const char* what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw MalformedLog(std::string("bad integer for ") + what + ": '" + s + "'");
    return v;
}

double to_double(const std::string& s, const char* what) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw MalformedLog(std::string("bad number for ") + what + ": '" + s + "'");
    return v;
}

} // namespace

std::string_view to_string(EventKind kind) noexcept {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "?";
}

EventKind parse_event_kind(std::string_view text) {
    for (const auto& [k, name] : kKindNames)
        if (name == text) return k;
    throw MalformedLog("unknown event kind '" + std::string(text) + "'");
}

bool is_task_terminal(EventKind kind) noexcept {
    return kind == EventKind::TaskDone || kind == EventKind::TaskFailed ||
           kind == EventKind::TaskCanceled;
}

std::string dump_event(const Event& e) {
    ordered_json j;
    j["ts"] = e.ts;
    j["kind"] = to_string(e.kind);
    j["task_uid"] = e.task_uid ? ordered_json(*e.task_uid) : ordered_json(nullptr);
    j["node_ids"] = e.node_ids ? ordered_json(*e.node_ids) : ordered_json(nullptr);
    j["detail"] = e.detail;
    return j.dump();
}

std::string dump_event_log(const EventLog& log) {
    std::string out;
    for (const auto& e : log) {
        out += dump_event(e);
        out += '\n';
    }
    return out;
}

EventLog parse_event_log(const std::string& text, const std::string& source) {
    EventLog log;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            Event e;
            e.ts = j.at("ts").get<double>();
            e.kind = parse_event_kind(j.at("kind").get<std::string>());
            if (const auto& u = j.at("task_uid"); !u.is_null()) e.task_uid = u.get<std::string>();
            if (const auto& n = j.at("node_ids"); !n.is_null()) e.node_ids = n.get<std::vector<int>>();
            e.detail = j.at("detail").get<std::string>();
            log.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedLog(where + ": " + ex.what());
        } catch (const MalformedLog& ex) {
            throw MalformedLog(where + ": " + ex.what());
        }
    }
    return log;
}

EventLog load_event_log(const std::filesystem::path& path) {
    return parse_event_log(detail::read_file(path), path.string());
}

void save_event_log(const EventLog& log, const std::filesystem::path& path) {
    detail::write_file(path, dump_event_log(log));
}

bool has_job_end(const EventLog& log) noexcept {
    return !log.empty() && log.back().kind == EventKind::JobEnd;
}

void require_complete(const EventLog& log) {
    if (!has_job_end(log)) throw IncompleteLog("event log does not end with JOB_END");
}

std::map<std::string, std::string> parse_detail(std::string_view detail) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(detail)};
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            out.emplace(token, "");
        else
            out[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return out;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), p);
}

std::string format_job_info(const JobInfo& i) {
    return "platform=" + i.platform + " nodes=" + std::to_string(i.nodes) +
           " cores_per_node=" + std::to_string(i.cores_per_node) +
           " gpus_per_node=" + std::to_string(i.gpus_per_node) +
           " walltime_s=" + format_double(i.walltime_s) + " attempt=" + std::to_string(i.attempt);
}

std::optional<JobInfo> job_info(const EventLog& log) {
    if (log.empty() || log.front().kind != EventKind::JobStart) return std::nullopt;
    const auto kv = parse_detail(log.front().detail);
    if (!kv.contains("nodes")) return std::nullopt;
    JobInfo i;
    auto get = [&](const char* k) -> std::string {
        auto it = kv.find(k);
        return it == kv.end() ? std::string() : it->second;
    };
    i.platform = get("platform");
    i.nodes = to_int(get("nodes"), "nodes");
    i.cores_per_node = to_int(get("cores_per_node"), "cores_per_node");
    i.gpus_per_node = to_int(get("gpus_per_node"), "gpus_per_node");
    i.walltime_s = to_double(get("walltime_s"), "walltime_s");
    if (kv.contains("attempt")) i.attempt = to_int(get("attempt"), "attempt");
    return i;
}

std::string format_slot_detail(const SlotDetail& s) {
    return "cores=" + std::to_string(s.cores) + " gpus=" + std::to_string(s.gpus);
}

std::optional<SlotDetail> parse_slot_detail(std::string_view detail) {
    const auto kv = parse_detail(detail);
    auto c = kv.find("cores");
    auto g = kv.find("gpus");
    if (c == kv.end() || g == kv.end()) return std::nullopt;
    return SlotDetail{to_int(c->second, "cores"), to_int(g->second, "gpus")};
}

} // namespace ensemblekit
