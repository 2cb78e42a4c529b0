#include "ensemblekit/error.hpp"
#include "ensemblekit/platform.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ensemblekit;
namespace fs = std::filesystem;

namespace {

TaskDescription shape(int procs, int threads, int gpus) {
    TaskDescription d;
    d.uid = "t";
    d.executable = "x";
    d.cpu_processes = procs;
    d.cpu_threads_per_process = threads;
    d.gpus_per_process = gpus;
    return d;
}

const NodeSpec frontier_node{64, 8, 8};

} // namespace

TEST(UsableCores, Examples) {
    EXPECT_EQ(usable_cores({64, 8, 8}), 56);
    EXPECT_EQ(usable_cores({8, 0, 0}), 8);
    EXPECT_THROW(usable_cores({8, 8, 0}), InvalidNodeSpec);
}

TEST(Footprint, ExaConstitTask) {
    EXPECT_EQ(task_footprint(shape(64, 7, 1), frontier_node), (Footprint{8, 8}));
}

TEST(Footprint, AdditiveFoamTask) {
    EXPECT_EQ(task_footprint(shape(224, 1, 0), frontier_node), (Footprint{4, 56}));
}

TEST(Footprint, SingleCore) {
    EXPECT_EQ(task_footprint(shape(1, 1, 0), NodeSpec{2, 0, 0}), (Footprint{1, 1}));
}

TEST(Footprint, GpuBottleneck) {
    // 4 cores per rank would allow 14 per node; 2 GPUs per rank allow only 4.
    EXPECT_EQ(task_footprint(shape(10, 4, 2), frontier_node), (Footprint{3, 4}));
}

TEST(Footprint, OversizedProcessIsUnplaceable) {
    EXPECT_THROW(task_footprint(shape(1, 57, 0), frontier_node), Unplaceable);
    EXPECT_THROW(task_footprint(shape(1, 1, 9), frontier_node), Unplaceable);
}

TEST(FootprintProperty, TightCeiling) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5000; ++i) {
        const int total = 1 + static_cast<int>(rng() % 128);
        const NodeSpec node{total, static_cast<int>(rng() % total), static_cast<int>(rng() % 9)};
        const int usable = node.cores_total - node.cores_reserved;
        const int threads = 1 + static_cast<int>(rng() % usable);
        const int gpus = node.gpus > 0 ? static_cast<int>(rng() % (node.gpus + 1)) : 0;
        const int procs = 1 + static_cast<int>(rng() % 500);
        const auto fp = task_footprint(shape(procs, threads, gpus), node);
        ASSERT_GE(fp.procs_per_node, 1);
        EXPECT_GE(fp.nodes_needed * fp.procs_per_node, procs);
        EXPECT_LT((fp.nodes_needed - 1) * fp.procs_per_node, procs);
        EXPECT_LE(fp.procs_per_node * threads, usable);
        if (gpus > 0) EXPECT_LE(fp.procs_per_node * gpus, node.gpus);
    }
}

TEST(Walltime, TableLookup) {
    const WalltimePolicy p{{{100, 7200}, {8000, 43200}}};
    EXPECT_EQ(max_walltime_for(p, 40), 7200);
    EXPECT_EQ(max_walltime_for(p, 100), 7200);
    EXPECT_EQ(max_walltime_for(p, 8000), 43200);
    EXPECT_THROW(max_walltime_for(p, 9000), PolicyGap);
}

TEST(Walltime, NonMonotoneTable) {
    const WalltimePolicy p{{{10, 600}, {20, 100}, {30, 900}}};
    EXPECT_EQ(max_walltime_for(p, 15), 100);
    EXPECT_EQ(max_walltime_for(p, 25), 900);
}

TEST(Profiles, FrontierSim) {
    const auto p = frontier_sim_profile();
    EXPECT_EQ(usable_cores(p.node), 56);
    EXPECT_EQ(p.node.gpus, 8);
    EXPECT_EQ(p.bootstrap_overhead_s, 85);
    EXPECT_TRUE(validate_platform(p).empty());
    // 8000-node allocation: 448,000 usable cores and 64,000 GPUs.
    EXPECT_EQ(8000LL * usable_cores(p.node), 448000);
    EXPECT_EQ(8000LL * p.node.gpus, 64000);
    EXPECT_NO_THROW(max_walltime_for(p.policy, p.node_count));
}

TEST(Profiles, Local) {
    const auto p = local_profile();
    EXPECT_EQ(p.bootstrap_overhead_s, 0);
    EXPECT_EQ(p.node_count, 1);
    EXPECT_TRUE(validate_platform(p).empty());
}

TEST(Profiles, Unknown) { EXPECT_THROW(builtin_profile("no-such-machine"), UnknownProfile); }

TEST(Profiles, ProfileDirectory) {
    const auto dir = fs::temp_directory_path() / "ek_profiles";
    fs::create_directories(dir);
    auto p = frontier_sim_profile();
    p.name = "crusher-sim";
    p.node_count = 192;
    p.policy.tiers = {{192, 28800}};
    save_platform_config(p, dir / "crusher-sim.json");
    ::setenv("ENSEMBLEKIT_PROFILE_DIR", dir.c_str(), 1);
    EXPECT_EQ(builtin_profile("crusher-sim"), p);
    ::unsetenv("ENSEMBLEKIT_PROFILE_DIR");
    EXPECT_THROW(builtin_profile("crusher-sim"), UnknownProfile);
}

TEST(PlatformIo, RoundTrip) {
    const auto p = frontier_sim_profile();
    EXPECT_EQ(parse_platform_config(dump_platform_config(p)), p);
    const auto path = fs::temp_directory_path() / "ek_platform.json";
    save_platform_config(p, path);
    EXPECT_EQ(load_platform_config(path), p);
}

TEST(PlatformIo, ReservedEqualsTotalIsInvalid) {
    auto p = frontier_sim_profile();
    p.node.cores_reserved = p.node.cores_total;
    EXPECT_THROW(parse_platform_config(dump_platform_config(p)), ValidationError);
}

TEST(PlatformIo, NonIncreasingTiersAreInvalid) {
    auto p = frontier_sim_profile();
    p.policy.tiers = {{100, 10}, {100, 20}, {p.node_count, 30}};
    EXPECT_FALSE(validate_platform(p).empty());
}

TEST(PlatformIo, SyntaxErrorHasLine) {
    try {
        parse_platform_config("{\n\"name\": \"x\",\n oops\n}", "p.json");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}
