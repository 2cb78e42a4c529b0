#pragma once

#include "ensemblekit/platform.hpp"
#include "ensemblekit/pst.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace ensemblekit {

/// Resource demand of one queued task, precomputed from its description.
struct SlotRequest {
    std::string uid;
    int cpu_processes = 1;
    int cores_per_process = 1;
    int gpus_per_process = 0;
    Footprint footprint;
};

SlotRequest make_slot_request(const TaskDescription& desc, const NodeSpec& node);

struct NodeSlots {
    int node_id = 0;
    int free_cores = 0;
    int free_gpus = 0;
    bool healthy = true;

    bool operator==(const NodeSlots&) const = default;
};

struct NodeShare {
    int node_id = 0;
    int procs = 0;
    int cores = 0;
    int gpus = 0;

    bool operator==(const NodeShare&) const = default;
};

struct Placement {
    std::uint64_t id = 0;
    std::string uid;
    std::vector<NodeShare> shares;   // full nodes first, remainder last

    std::vector<int> node_ids() const;
    int total_cores() const noexcept;
    int total_gpus() const noexcept;
};

/// Free core/GPU bookkeeping for the nodes of one allocation.
class SlotTable {
public:
    SlotTable(const NodeSpec& node, int node_count);

    /// First-fit by ascending node id: the first nodes_needed-1 healthy
    /// nodes that hold a full node's worth of processes, then the lowest
    /// remaining healthy node that holds the remainder. Leaves the table
    /// untouched and returns nullopt when that is impossible.
    std::optional<Placement> try_place(const SlotRequest& request);

    /// Throws DoubleRelease for a placement that is not active.
    void release(const Placement& placement);

    /// Unhealthy nodes are skipped by later placements; current ones stay.
    void mark_node_health(int node_id, bool healthy);

    const NodeSlots& node(int node_id) const;
    std::span<const NodeSlots> nodes() const noexcept { return nodes_; }
    int node_count() const noexcept { return static_cast<int>(nodes_.size()); }
    int usable_cores_per_node() const noexcept { return usable_cores_; }
    int gpus_per_node() const noexcept { return gpus_; }
    std::size_t active_placements() const noexcept { return active_.size(); }
    bool is_active(std::uint64_t placement_id) const { return active_.contains(placement_id); }

private:
    NodeSlots& node_ref(int node_id);
    bool fits(const NodeSlots& n, int cores, int gpus) const noexcept {
        return n.healthy && n.free_cores >= cores && n.free_gpus >= gpus;
    }

    std::vector<NodeSlots> nodes_;
    int usable_cores_ = 0;
    int gpus_ = 0;
    long long healthy_free_cores_ = 0;
    long long healthy_free_gpus_ = 0;
    std::uint64_t next_id_ = 1;
    std::unordered_set<std::uint64_t> active_;
};

struct DrainResult {
    std::vector<Placement> placed;
    std::vector<SlotRequest> waiting;
};

/// Strict FIFO: places from the head until the first request that does
/// not fit; nothing behind it is considered.
DrainResult drain_queue(SlotTable& table, std::span<const SlotRequest> queue);

/// In-place variant for the engine: pops placed requests off `queue`.
std::vector<Placement> drain_queue(SlotTable& table, std::deque<SlotRequest>& queue);

} // namespace ensemblekit
