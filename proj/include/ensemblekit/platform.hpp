#pragma once

#include "ensemblekit/pst.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ensemblekit {

struct NodeSpec {
    int cores_total = 1;
    int cores_reserved = 0;   // held back for system processes
    int gpus = 0;

    bool operator==(const NodeSpec&) const = default;
};

/// Cores available to tasks; throws InvalidNodeSpec if nothing is left.
int usable_cores(const NodeSpec& node);

struct WalltimeTier {
    int max_nodes = 1;
    double max_walltime_s = 0;

    bool operator==(const WalltimeTier&) const = default;
};

/// Facility rule table: requested node count -> longest allowed job.
/// Tiers are sorted by strictly increasing max_nodes; walltimes are arbitrary.
struct WalltimePolicy {
    std::vector<WalltimeTier> tiers;

    bool operator==(const WalltimePolicy&) const = default;
};

/// Walltime of the first tier whose max_nodes covers the request.
double max_walltime_for(const WalltimePolicy& policy, int nodes_requested);

struct PlatformConfig {
    std::string name;
    NodeSpec node;
    int node_count = 1;
    WalltimePolicy policy;
    double bootstrap_overhead_s = 0;

    bool operator==(const PlatformConfig&) const = default;
};

std::vector<std::string> validate_platform(const PlatformConfig& config);

struct Footprint {
    int nodes_needed = 0;
    int procs_per_node = 0;

    bool operator==(const Footprint&) const = default;
};

/// How many nodes a task spans when each node is packed with as many whole
/// processes as its usable cores and GPUs allow. Throws Unplaceable when a
/// single process does not fit a node.
Footprint task_footprint(const TaskDescription& desc, const NodeSpec& node);

PlatformConfig parse_platform_config(const std::string& text,
                                     const std::string& source = "<platform>");
std::string dump_platform_config(const PlatformConfig& config);
PlatformConfig load_platform_config(const std::filesystem::path& path);
void save_platform_config(const PlatformConfig& config, const std::filesystem::path& path);

/// Built-in profiles: "frontier-sim" and "local". Other names are looked up
/// as `<name>.json` in $ENSEMBLEKIT_PROFILE_DIR. Throws UnknownProfile.
PlatformConfig builtin_profile(const std::string& name);
PlatformConfig frontier_sim_profile();
PlatformConfig local_profile();

} // namespace ensemblekit
