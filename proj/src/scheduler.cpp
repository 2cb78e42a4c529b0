#include "ensemblekit/scheduler.hpp"

#include "ensemblekit/error.hpp"

namespace ensemblekit {

SlotRequest make_slot_request(const TaskDescription& desc, const NodeSpec& node) {
    return {desc.uid, desc.cpu_processes, desc.cpu_threads_per_process, desc.gpus_per_process,
            task_footprint(desc, node)};
}

std::vector<int> Placement::node_ids() const {
    std::vector<int> ids;
    ids.reserve(shares.size());
    for (const auto& s : shares) ids.push_back(s.node_id);
    return ids;
}

int Placement::total_cores() const noexcept {
    int n = 0;
    for (const auto& s : shares) n += s.cores;
    return n;
}

int Placement::total_gpus() const noexcept {
    int n = 0;
    for (const auto& s : shares) n += s.gpus;
    return n;
}

SlotTable::SlotTable(const NodeSpec& node, int node_count)
    : usable_cores_(usable_cores(node)), gpus_(node.gpus) {
    if (node_count < 1) throw ConfigError("slot table needs at least one node");
    nodes_.reserve(node_count);
    for (int i = 0; i < node_count; ++i) nodes_.push_back({i, usable_cores_, gpus_, true});
    healthy_free_cores_ = static_cast<long long>(usable_cores_) * node_count;
    healthy_free_gpus_ = static_cast<long long>(gpus_) * node_count;
}

NodeSlots& SlotTable::node_ref(int node_id) {
    if (node_id < 0 || node_id >= node_count())
        throw UnknownNode("node " + std::to_string(node_id) + " is not in the allocation");
    return nodes_[node_id];
}

const NodeSlots& SlotTable::node(int node_id) const {
    return const_cast<SlotTable*>(this)->node_ref(node_id);
}

std::optional<Placement> SlotTable::try_place(const SlotRequest& r) {
    const int per_node = r.footprint.procs_per_node;
    const int needed = r.footprint.nodes_needed;
    const int remainder = r.cpu_processes - (needed - 1) * per_node;
    const long long want_cores = static_cast<long long>(r.cpu_processes) * r.cores_per_process;
    const long long want_gpus = static_cast<long long>(r.cpu_processes) * r.gpus_per_process;
    if (needed < 1 || needed > node_count() || want_cores > healthy_free_cores_ ||
        want_gpus > healthy_free_gpus_)
        return std::nullopt;

    const int full_cores = per_node * r.cores_per_process;
    const int full_gpus = per_node * r.gpus_per_process;
    std::vector<int> chosen;
    chosen.reserve(needed);
    for (const auto& n : nodes_) {
        if (static_cast<int>(chosen.size()) == needed - 1) break;
        if (fits(n, full_cores, full_gpus)) chosen.push_back(n.node_id);
    }
    if (static_cast<int>(chosen.size()) < needed - 1) return std::nullopt;

    const int rem_cores = remainder * r.cores_per_process;
    const int rem_gpus = remainder * r.gpus_per_process;
    // `chosen` is ascending, so one cursor skips the nodes already used.
    int last = -1;
    std::size_t cursor = 0;
    for (const auto& n : nodes_) {
        if (cursor < chosen.size() && chosen[cursor] == n.node_id) {
            ++cursor;
            continue;
        }
        if (fits(n, rem_cores, rem_gpus)) {
            last = n.node_id;
            break;
        }
    }
    if (last < 0) return std::nullopt;

    Placement p;
    p.id = next_id_++;
    p.uid = r.uid;
    p.shares.reserve(needed);
    for (int id : chosen) p.shares.push_back({id, per_node, full_cores, full_gpus});
    p.shares.push_back({last, remainder, rem_cores, rem_gpus});
    for (const auto& s : p.shares) {
        auto& n = nodes_[s.node_id];
        n.free_cores -= s.cores;
        n.free_gpus -= s.gpus;
        healthy_free_cores_ -= s.cores;
        healthy_free_gpus_ -= s.gpus;
    }
    active_.insert(p.id);
    return p;
}

void SlotTable::release(const Placement& p) {
    if (active_.erase(p.id) == 0)
        throw DoubleRelease("placement " + std::to_string(p.id) + " of task " + p.uid +
                            " is not active");
    for (const auto& s : p.shares) {
        auto& n = node_ref(s.node_id);
        n.free_cores += s.cores;
        n.free_gpus += s.gpus;
        if (n.healthy) {
            healthy_free_cores_ += s.cores;
            healthy_free_gpus_ += s.gpus;
        }
    }
}

void SlotTable::mark_node_health(int node_id, bool healthy) {
    auto& n = node_ref(node_id);
    if (n.healthy == healthy) return;
    const int sign = healthy ? 1 : -1;
    healthy_free_cores_ += sign * n.free_cores;
    healthy_free_gpus_ += sign * n.free_gpus;
    n.healthy = healthy;
}

DrainResult drain_queue(SlotTable& table, std::span<const SlotRequest> queue) {
    std::deque<SlotRequest> q(queue.begin(), queue.end());
    DrainResult out;
    out.placed = drain_queue(table, q);
    out.waiting.assign(q.begin(), q.end());
    return out;
}

std::vector<Placement> drain_queue(SlotTable& table, std::deque<SlotRequest>& queue) {
    std::vector<Placement> placed;
    while (!queue.empty()) {
        auto p = table.try_place(queue.front());
        if (!p) break;
        placed.push_back(std::move(*p));
        queue.pop_front();
    }
    return placed;
}

} // namespace ensemblekit
