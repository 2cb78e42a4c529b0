#pragma once

#include "ensemblekit/pst.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ensemblekit {

/// Duration source for one class of task.
struct RuntimeDistribution {
    enum class Kind { Fixed, Uniform, FromExpected };

    Kind kind = Kind::FromExpected;
    double lo_s = 0;   // Fixed uses lo_s only
    double hi_s = 0;

    static RuntimeDistribution fixed(double s) { return {Kind::Fixed, s, s}; }
    static RuntimeDistribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
    static RuntimeDistribution from_expected() { return {}; }
};

/// Maps tasks to simulated runtimes. A task's class is its "class" tag, or
/// its stage name when the tag is absent. Draws depend only on
/// (seed, uid), so a task keeps its runtime regardless of queue order.
struct RuntimeModel {
    RuntimeDistribution default_distribution;
    std::map<std::string, RuntimeDistribution> by_class;
    std::uint64_t seed = 0;

    /// Throws ConfigError on lo > hi or non-positive durations.
    void validate() const;
    double sample(const TaskDescription& desc) const;
};

struct Fault {
    enum class Kind { PersistentNode, TransientNode, TaskFault };

    Kind kind = Kind::TaskFault;
    int node_id = -1;          // node faults
    double at_ts = 0;          // node faults, seconds from job start
    std::string uid;           // task faults
    double at_fraction = 1.0;  // task faults, fraction of the runtime in (0, 1]

    static Fault persistent_node(int node, double ts) { return {Kind::PersistentNode, node, ts, {}, 1.0}; }
    static Fault transient_node(int node, double ts) { return {Kind::TransientNode, node, ts, {}, 1.0}; }
    static Fault task_fault(std::string uid, double fraction) {
        return {Kind::TaskFault, -1, 0, std::move(uid), fraction};
    }
};

/// Injected faults. `random_task_fault_probability` adds seeded per-launch
/// task faults on top of the explicit list; draws vary with the attempt.
struct FailureModel {
    std::vector<Fault> faults;
    double random_task_fault_probability = 0;
    std::uint64_t seed = 0;

    /// Copy without node faults: a fresh allocation does not inherit bad nodes.
    FailureModel without_node_faults() const;
};

/// Deterministic 64-bit mixing of a seed with a string key.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) noexcept;
/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
double unit_interval(std::uint64_t bits) noexcept;

} // namespace ensemblekit
