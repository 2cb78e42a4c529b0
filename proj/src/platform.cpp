#include "ensemblekit/platform.hpp"

#include "ensemblekit/error.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace ensemblekit {

using detail::json;

int usable_cores(const NodeSpec& node) {
    if (node.cores_total < 1 || node.cores_reserved < 0 || node.cores_reserved >= node.cores_total)
        throw InvalidNodeSpec("cores_reserved (" + std::to_string(node.cores_reserved) +
                              ") must be below cores_total (" + std::to_string(node.cores_total) + ")");
    return node.cores_total - node.cores_reserved;
}

double max_walltime_for(const WalltimePolicy& policy, int nodes_requested) {
    if (nodes_requested >= 1) {
        for (const auto& tier : policy.tiers)
            if (tier.max_nodes >= nodes_requested) return tier.max_walltime_s;
    }
    throw PolicyGap("no walltime tier covers " + std::to_string(nodes_requested) + " nodes");
}

std::vector<std::string> validate_platform(const PlatformConfig& c) {
    std::vector<std::string> out;
    if (c.name.empty()) out.push_back("name must be non-empty");
    if (c.node.cores_total < 1) out.push_back("node.cores_total must be ≥ 1");
    if (c.node.cores_reserved < 0) out.push_back("node.cores_reserved must be ≥ 0");
    if (c.node.cores_reserved >= c.node.cores_total)
        out.push_back("node.cores_reserved must be < node.cores_total");
    if (c.node.gpus < 0) out.push_back("node.gpus must be ≥ 0");
    if (c.node_count < 1) out.push_back("node_count must be ≥ 1");
    if (c.bootstrap_overhead_s < 0) out.push_back("bootstrap_overhead_s must be ≥ 0");
    if (c.policy.tiers.empty()) out.push_back("policy.tiers must be non-empty");
    for (std::size_t i = 0; i < c.policy.tiers.size(); ++i) {
        const auto& t = c.policy.tiers[i];
        if (t.max_nodes < 1) out.push_back("policy tier " + std::to_string(i) + ": max_nodes must be ≥ 1");
        if (!(t.max_walltime_s > 0))
            out.push_back("policy tier " + std::to_string(i) + ": max_walltime_s must be > 0");
        if (i > 0 && t.max_nodes <= c.policy.tiers[i - 1].max_nodes)
            out.push_back("policy tiers must have strictly increasing max_nodes");
    }
    if (!c.policy.tiers.empty() && c.policy.tiers.back().max_nodes < c.node_count)
        out.push_back("last policy tier must cover node_count");
    return out;
}

Footprint task_footprint(const TaskDescription& desc, const NodeSpec& node) {
    const int cores = usable_cores(node);
    int per_node = cores / desc.cpu_threads_per_process;
    if (desc.gpus_per_process > 0) per_node = std::min(per_node, node.gpus / desc.gpus_per_process);
    if (per_node < 1)
        throw Unplaceable("task " + desc.uid + ": one process needs " +
                          std::to_string(desc.cpu_threads_per_process) + " cores and " +
                          std::to_string(desc.gpus_per_process) + " GPUs, node offers " +
                          std::to_string(cores) + " cores and " + std::to_string(node.gpus) + " GPUs");
    const int nodes = (desc.cpu_processes + per_node - 1) / per_node;
    return {nodes, std::min(per_node, desc.cpu_processes)};
}

PlatformConfig parse_platform_config(const std::string& text, const std::string& source) {
    const json j = detail::parse_json(text, source);
    PlatformConfig c = detail::convert(source, [&] {
        PlatformConfig c;
        c.name = j.at("name").get<std::string>();
        const auto& n = j.at("node");
        c.node.cores_total = n.at("cores_total").get<int>();
        c.node.cores_reserved = n.value("cores_reserved", 0);
        c.node.gpus = n.value("gpus", 0);
        c.node_count = j.at("node_count").get<int>();
        c.bootstrap_overhead_s = j.value("bootstrap_overhead_s", 0.0);
        for (const auto& t : j.at("policy").at("tiers"))
            c.policy.tiers.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
        return c;
    });
    if (auto v = validate_platform(c); !v.empty()) {
        std::string msg = source + ":";
        for (const auto& s : v) msg += "\n  " + s;
        throw ValidationError(msg);
    }
    return c;
}

std::string dump_platform_config(const PlatformConfig& c) {
    json tiers = json::array();
    for (const auto& t : c.policy.tiers) tiers.push_back(json::array({t.max_nodes, t.max_walltime_s}));
    json j = {
        {"name", c.name},
        {"node", {{"cores_total", c.node.cores_total},
                  {"cores_reserved", c.node.cores_reserved},
                  {"gpus", c.node.gpus}}},
        {"node_count", c.node_count},
        {"bootstrap_overhead_s", c.bootstrap_overhead_s},
        {"policy", {{"tiers", std::move(tiers)}}},
    };
    return j.dump(2) + "\n";
}

PlatformConfig load_platform_config(const std::filesystem::path& path) {
    return parse_platform_config(detail::read_file(path), path.string());
}

void save_platform_config(const PlatformConfig& config, const std::filesystem::path& path) {
    detail::write_file(path, dump_platform_config(config));
}

PlatformConfig frontier_sim_profile() {
    PlatformConfig c;
    c.name = "frontier-sim";
    c.node = {64, 8, 8};
    c.node_count = 9408;
    c.bootstrap_overhead_s = 85;
    // Illustrative bins shaped like a leadership-facility policy.
    c.policy.tiers = {{91, 7200}, {183, 21600}, {9408, 43200}};
    return c;
}

PlatformConfig local_profile() {
    PlatformConfig c;
    c.name = "local";
    const int host = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    c.node = {host, 0, 0};
    c.node_count = 1;
    c.bootstrap_overhead_s = 0;
    c.policy.tiers = {{1, 7 * 24 * 3600.0}};
    return c;
}

PlatformConfig builtin_profile(const std::string& name) {
    if (name == "frontier-sim") return frontier_sim_profile();
    if (name == "local") return local_profile();
    if (const char* dir = std::getenv("ENSEMBLEKIT_PROFILE_DIR"); dir && *dir) {
        const auto path = std::filesystem::path(dir) / (name + ".json");
        if (std::filesystem::exists(path)) return load_platform_config(path);
    }
    throw UnknownProfile("no platform profile named '" + name + "'");
}

} // namespace ensemblekit
