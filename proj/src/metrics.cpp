#include "ensemblekit/metrics.hpp"

#include "ensemblekit/error.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ensemblekit {

using detail::json;

namespace {

struct Lifecycle {
    std::optional<double> scheduled;
    std::optional<double> launched;
    std::optional<double> ended;
    std::vector<int> nodes;
    std::optional<SlotDetail> slots;
};

/// Replays task events with ordering checks, keyed by uid.
std::unordered_map<std::string, Lifecycle> lifecycles(const EventLog& log) {
    std::unordered_map<std::string, Lifecycle> out;
    double last_ts = -std::numeric_limits<double>::infinity();
    for (const auto& e : log) {
        if (e.ts < last_ts) throw MalformedLog("timestamps decrease at " + format_double(e.ts));
        last_ts = e.ts;
        const bool task_event = e.kind == EventKind::TaskScheduled || e.kind == EventKind::TaskLaunched ||
                                is_task_terminal(e.kind);
        if (!task_event) continue;
        if (!e.task_uid) throw MalformedLog(std::string(to_string(e.kind)) + " without task_uid");
        auto& l = out[*e.task_uid];
        const std::string who = "task " + *e.task_uid + ": ";
        if (l.ended) throw MalformedLog(who + std::string(to_string(e.kind)) + " after terminal event");
        switch (e.kind) {
        case EventKind::TaskScheduled:
            if (l.scheduled) throw MalformedLog(who + "scheduled twice");
            l.scheduled = e.ts;
            l.nodes = e.node_ids.value_or(std::vector<int>{});
            l.slots = parse_slot_detail(e.detail);
            break;
        case EventKind::TaskLaunched:
            if (!l.scheduled || l.launched) throw MalformedLog(who + "launch without a prior schedule");
            l.launched = e.ts;
            break;
        case EventKind::TaskDone:
        case EventKind::TaskFailed:
            if (!l.launched) throw MalformedLog(who + std::string(to_string(e.kind)) + " before launch");
            l.ended = e.ts;
            break;
        case EventKind::TaskCanceled:
            l.ended = e.ts;
            break;
        default:
            break;
        }
    }
    return out;
}

double first_ts(const EventLog& log, EventKind kind, double fallback) {
    for (const auto& e : log)
        if (e.kind == kind) return e.ts;
    return fallback;
}

UnitAccount account(double capacity, double ovh, double busy) {
    UnitAccount a;
    a.capacity = capacity;
    a.ovh = ovh;
    a.busy = busy;
    a.idle = capacity - ovh - busy;
    a.utilization_fraction = capacity > 0 ? busy / capacity : 0;
    return a;
}

} // namespace

UtilizationStack compute_utilization(const EventLog& log, const PlatformConfig& platform,
                                     int allocation_nodes) {
    require_complete(log);
    const auto tasks = lifecycles(log);
    const int cores_per_node = usable_cores(platform.node);
    const int gpus_per_node = platform.node.gpus;

    UtilizationStack s;
    s.allocation_nodes = allocation_nodes;
    s.job_runtime_s = log.back().ts;
    s.ovh_s = first_ts(log, EventKind::BootstrapDone, 0.0);
    s.ttx_s = s.job_runtime_s - s.ovh_s;

    std::vector<std::vector<std::pair<double, double>>> per_node(allocation_nodes);
    double core_busy = 0;
    double gpu_busy = 0;
    for (const auto& [uid, l] : tasks) {
        if (l.launched && !l.ended) throw MalformedLog("task " + uid + " never reached a terminal state");
        if (!l.launched) continue;
        const double dur = *l.ended - *l.launched;
        for (int n : l.nodes) {
            if (n < 0 || n >= allocation_nodes)
                throw MalformedLog("task " + uid + " holds node " + std::to_string(n) +
                                   " outside the allocation");
            per_node[n].emplace_back(*l.launched, *l.ended);
        }
        const auto slots = l.slots.value_or(SlotDetail{static_cast<int>(l.nodes.size()) * cores_per_node,
                                                       static_cast<int>(l.nodes.size()) * gpus_per_node});
        core_busy += slots.cores * dur;
        gpu_busy += slots.gpus * dur;
    }

    double node_busy = 0;
    for (auto& iv : per_node) {
        std::sort(iv.begin(), iv.end());
        double lo = 0, hi = 0;
        bool open = false;
        for (const auto& [a, b] : iv) {
            if (open && a <= hi) {
                hi = std::max(hi, b);
                continue;
            }
            if (open) node_busy += hi - lo;
            lo = a;
            hi = b;
            open = true;
        }
        if (open) node_busy += hi - lo;
    }

    const double n = allocation_nodes;
    s.nodes = account(n * s.job_runtime_s, n * s.ovh_s, node_busy);
    s.cores = account(n * cores_per_node * s.job_runtime_s, n * cores_per_node * s.ovh_s, core_busy);
    s.gpus = account(n * gpus_per_node * s.job_runtime_s, n * gpus_per_node * s.ovh_s, gpu_busy);
    return s;
}

int ConcurrencySeries::max_running() const noexcept {
    int m = 0;
    for (const auto& p : points) m = std::max(m, p.n_running);
    return m;
}

ConcurrencySeries concurrency_series(const EventLog& log) {
    lifecycles(log);   // ordering checks
    ConcurrencySeries out;
    std::unordered_map<std::string, int> phase;   // 1 pending, 2 running
    int pending = 0;
    int running = 0;
    for (std::size_t i = 0; i < log.size();) {
        const double ts = log[i].ts;
        for (; i < log.size() && log[i].ts == ts; ++i) {
            const auto& e = log[i];
            if (!e.task_uid) continue;
            int& ph = phase[*e.task_uid];
            if (e.kind == EventKind::TaskScheduled) {
                ++pending;
                ph = 1;
            } else if (e.kind == EventKind::TaskLaunched) {
                --pending;
                ++running;
                ph = 2;
            } else if (is_task_terminal(e.kind)) {
                if (ph == 1) --pending;
                if (ph == 2) --running;
                ph = 0;
            }
        }
        const ConcurrencyPoint p{ts, pending, running};
        if (out.points.empty() || out.points.back().n_running != running ||
            out.points.back().n_scheduled_pending_launch != pending)
            out.points.push_back(p);
    }
    return out;
}

RateSummary throughput(const EventLog& log) {
    std::vector<double> sched, launch;
    for (const auto& e : log) {
        if (e.kind == EventKind::TaskScheduled) sched.push_back(e.ts);
        if (e.kind == EventKind::TaskLaunched) launch.push_back(e.ts);
    }
    if (sched.size() < 2)
        throw InsufficientData("throughput needs at least two TASK_SCHEDULED events");

    const auto series = concurrency_series(log);
    RateSummary r;
    r.ramp_start_ts = sched.front();
    r.ramp_end_ts = series.points.empty() ? sched.back() : series.points.back().ts;
    std::optional<double> last_rise;
    for (std::size_t k = 1; k < series.points.size(); ++k) {
        const int prev = series.points[k - 1].n_running;
        const int cur = series.points[k].n_running;
        if (cur > prev) last_rise = series.points[k].ts;
        if (cur < prev) break;
    }
    if (last_rise) r.ramp_end_ts = *last_rise;

    auto rate = [&](const std::vector<double>& ts) -> std::optional<double> {
        std::vector<double> in;
        for (double t : ts)
            if (t <= r.ramp_end_ts) in.push_back(t);
        if (in.size() < 2 || !(in.back() > in.front())) return std::nullopt;
        return static_cast<double>(in.size() - 1) / (in.back() - in.front());
    };
    r.scheduling_rate_tasks_per_s = rate(sched);
    r.launching_rate_tasks_per_s = rate(launch);
    return r;
}

ExportFormat parse_export_format(const std::string& text) {
    if (text == "csv") return ExportFormat::Csv;
    if (text == "json") return ExportFormat::Json;
    throw ConfigError("unknown export format '" + text + "' (expected csv or json)");
}

namespace {

json unit_json(const UnitAccount& a) {
    return {{"capacity", a.capacity},
            {"ovh", a.ovh},
            {"busy", a.busy},
            {"idle", a.idle},
            {"utilization_fraction", a.utilization_fraction}};
}

UnitAccount unit_from_json(const json& j) {
    return {j.at("capacity").get<double>(), j.at("ovh").get<double>(), j.at("busy").get<double>(),
            j.at("idle").get<double>(), j.at("utilization_fraction").get<double>()};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

double cell_double(const std::string& s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad number '" + s + "'");
    return v;
}

int cell_int(const std::string& s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad integer '" + s + "'");
    return v;
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::optional<double> optional_cell(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return cell_double(s);
}

constexpr const char* kUtilHeader =
    "unit,allocation_nodes,job_runtime_s,ovh_s,ttx_s,capacity,ovh,busy,idle,utilization_fraction";
constexpr const char* kSeriesHeader = "ts,n_scheduled_pending_launch,n_running";
constexpr const char* kRatesHeader =
    "scheduling_rate_tasks_per_s,launching_rate_tasks_per_s,ramp_start_ts,ramp_end_ts";

} // namespace

std::string render(const UtilizationStack& s, ExportFormat format) {
    if (format == ExportFormat::Json) {
        json j = {{"allocation_nodes", s.allocation_nodes},
                  {"job_runtime_s", s.job_runtime_s},
                  {"ovh_s", s.ovh_s},
                  {"ttx_s", s.ttx_s},
                  {"nodes", unit_json(s.nodes)},
                  {"cores", unit_json(s.cores)},
                  {"gpus", unit_json(s.gpus)}};
        return j.dump(2) + "\n";
    }
    std::string out = std::string(kUtilHeader) + "\n";
    const std::pair<const char*, const UnitAccount*> units[] = {
        {"nodes", &s.nodes}, {"cores", &s.cores}, {"gpus", &s.gpus}};
    for (const auto& [name, a] : units) {
        out += std::string(name) + "," + std::to_string(s.allocation_nodes) + "," +
               format_double(s.job_runtime_s) + "," + format_double(s.ovh_s) + "," +
               format_double(s.ttx_s) + "," + format_double(a->capacity) + "," + format_double(a->ovh) +
               "," + format_double(a->busy) + "," + format_double(a->idle) + "," +
               format_double(a->utilization_fraction) + "\n";
    }
    return out;
}

std::string render(const ConcurrencySeries& series, ExportFormat format) {
    if (format == ExportFormat::Json) {
        json pts = json::array();
        for (const auto& p : series.points)
            pts.push_back({{"ts", p.ts},
                           {"n_scheduled_pending_launch", p.n_scheduled_pending_launch},
                           {"n_running", p.n_running}});
        return json{{"points", std::move(pts)}}.dump(2) + "\n";
    }
    std::string out = std::string(kSeriesHeader) + "\n";
    for (const auto& p : series.points)
        out += format_double(p.ts) + "," + std::to_string(p.n_scheduled_pending_launch) + "," +
               std::to_string(p.n_running) + "\n";
    return out;
}

std::string render(const RateSummary& r, ExportFormat format) {
    if (format == ExportFormat::Json) {
        json j = {{"scheduling_rate_tasks_per_s", optional_json(r.scheduling_rate_tasks_per_s)},
                  {"launching_rate_tasks_per_s", optional_json(r.launching_rate_tasks_per_s)},
                  {"ramp_start_ts", r.ramp_start_ts},
                  {"ramp_end_ts", r.ramp_end_ts}};
        return j.dump(2) + "\n";
    }
    return std::string(kRatesHeader) + "\n" + optional_cell(r.scheduling_rate_tasks_per_s) + "," +
           optional_cell(r.launching_rate_tasks_per_s) + "," + format_double(r.ramp_start_ts) + "," +
           format_double(r.ramp_end_ts) + "\n";
}

UtilizationStack parse_utilization(const std::string& text, ExportFormat format) {
    UtilizationStack s;
    if (format == ExportFormat::Json) {
        const json j = detail::parse_json(text, "<utilization>");
        return detail::convert("<utilization>", [&] {
            s.allocation_nodes = j.at("allocation_nodes").get<int>();
            s.job_runtime_s = j.at("job_runtime_s").get<double>();
            s.ovh_s = j.at("ovh_s").get<double>();
            s.ttx_s = j.at("ttx_s").get<double>();
            s.nodes = unit_from_json(j.at("nodes"));
            s.cores = unit_from_json(j.at("cores"));
            s.gpus = unit_from_json(j.at("gpus"));
            return s;
        });
    }
    const auto rows = csv_rows(text);
    if (rows.size() != 4 || rows[0].size() != 10) throw ParseError("utilization CSV needs header + 3 rows");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto& c = rows[k];
        if (c.size() != 10) throw ParseError("utilization CSV row has wrong width");
        s.allocation_nodes = cell_int(c[1]);
        s.job_runtime_s = cell_double(c[2]);
        s.ovh_s = cell_double(c[3]);
        s.ttx_s = cell_double(c[4]);
        UnitAccount a{cell_double(c[5]), cell_double(c[6]), cell_double(c[7]), cell_double(c[8]),
                      cell_double(c[9])};
        if (c[0] == "nodes")
            s.nodes = a;
        else if (c[0] == "cores")
            s.cores = a;
        else if (c[0] == "gpus")
            s.gpus = a;
        else
            throw ParseError("unknown unit '" + c[0] + "'");
    }
    return s;
}

ConcurrencySeries parse_concurrency(const std::string& text, ExportFormat format) {
    ConcurrencySeries out;
    if (format == ExportFormat::Json) {
        const json j = detail::parse_json(text, "<concurrency>");
        return detail::convert("<concurrency>", [&] {
            for (const auto& p : j.at("points"))
                out.points.push_back({p.at("ts").get<double>(), p.at("n_scheduled_pending_launch").get<int>(),
                                      p.at("n_running").get<int>()});
            return out;
        });
    }
    const auto rows = csv_rows(text);
    if (rows.empty()) throw ParseError("concurrency CSV lacks a header");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto& c = rows[k];
        if (c.size() != 3) throw ParseError("concurrency CSV row has wrong width");
        out.points.push_back({cell_double(c[0]), cell_int(c[1]), cell_int(c[2])});
    }
    return out;
}

RateSummary parse_rates(const std::string& text, ExportFormat format) {
    RateSummary r;
    if (format == ExportFormat::Json) {
        const json j = detail::parse_json(text, "<rates>");
        return detail::convert("<rates>", [&] {
            r.scheduling_rate_tasks_per_s = optional_from_json(j.at("scheduling_rate_tasks_per_s"));
            r.launching_rate_tasks_per_s = optional_from_json(j.at("launching_rate_tasks_per_s"));
            r.ramp_start_ts = j.at("ramp_start_ts").get<double>();
            r.ramp_end_ts = j.at("ramp_end_ts").get<double>();
            return r;
        });
    }
    const auto rows = csv_rows(text);
    if (rows.size() != 2 || rows[1].size() != 4) throw ParseError("rates CSV needs header + 1 row");
    const auto& c = rows[1];
    r.scheduling_rate_tasks_per_s = optional_cell(c[0]);
    r.launching_rate_tasks_per_s = optional_cell(c[1]);
    r.ramp_start_ts = cell_double(c[2]);
    r.ramp_end_ts = cell_double(c[3]);
    return r;
}

template <class T>
void export_metrics(const T& value, ExportFormat format, const std::filesystem::path& path) {
    detail::write_file(path, render(value, format));
}

template void export_metrics(const UtilizationStack&, ExportFormat, const std::filesystem::path&);
template void export_metrics(const ConcurrencySeries&, ExportFormat, const std::filesystem::path&);
template void export_metrics(const RateSummary&, ExportFormat, const std::filesystem::path&);

} // namespace ensemblekit
