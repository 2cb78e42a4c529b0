#include "ensemblekit/error.hpp"
#include "ensemblekit/examples.hpp"
#include "ensemblekit/resilience.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>

using namespace ensemblekit;

namespace {

TaskDescription task(const std::string& uid, int procs = 1, int threads = 7, int gpus = 1, double rt = 100) {
    TaskDescription d;
    d.uid = uid;
    d.executable = "x";
    d.cpu_processes = procs;
    d.cpu_threads_per_process = threads;
    d.gpus_per_process = gpus;
    d.expected_runtime_s = rt;
    return d;
}

WorkflowSpec staged(const std::string& name, const std::vector<std::vector<TaskDescription>>& stages) {
    WorkflowSpec w{name, {}};
    for (std::size_t s = 0; s < stages.size(); ++s) {
        Stage st{name + "-s" + std::to_string(s), {}};
        for (const auto& d : stages[s]) st.tasks.emplace_back(d);
        w.stages.push_back(std::move(st));
    }
    return w;
}

EventLog failures_log(const std::vector<std::pair<std::string, EventKind>>& outcomes) {
    EventLog log = {{0, EventKind::JobStart, {}, {}, ""}, {1, EventKind::BootstrapDone, {}, {}, ""}};
    double ts = 2;
    for (const auto& [uid, kind] : outcomes) {
        log.push_back({ts, EventKind::TaskScheduled, uid, std::vector<int>{0}, ""});
        log.push_back({ts, EventKind::TaskLaunched, uid, std::vector<int>{0}, ""});
        log.push_back({ts += 1, kind, uid, std::vector<int>{0}, kind == EventKind::TaskFailed ? "task_fault" : ""});
    }
    log.push_back({ts, EventKind::JobEnd, {}, {}, ""});
    return log;
}

FailureRecord record(const std::string& uid, std::size_t stage) {
    FailureRecord r;
    r.uid = uid;
    r.stage_index = stage;
    return r;
}

} // namespace

TEST(CollectFailures, TenFailures) {
    std::vector<TaskDescription> tasks;
    std::vector<std::pair<std::string, EventKind>> outcomes;
    for (int i = 0; i < 30; ++i) {
        tasks.push_back(task("t" + std::to_string(i)));
        outcomes.emplace_back("t" + std::to_string(i), i % 3 == 0 ? EventKind::TaskFailed : EventKind::TaskDone);
    }
    const auto recs = collect_failures(failures_log(outcomes), {staged("p", {tasks})}, false);
    EXPECT_EQ(recs.size(), 10u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.kind, FailureKind::TaskFault);
        EXPECT_EQ(r.pipeline, "p");
        EXPECT_EQ(r.stage_name, "p-s0");
    }
}

TEST(CollectFailures, AllDone) {
    const auto spec = staged("p", {{task("a"), task("b")}});
    EXPECT_TRUE(collect_failures(failures_log({{"a", EventKind::TaskDone}, {"b", EventKind::TaskDone}}), {spec}, true)
                    .empty());
}

TEST(CollectFailures, PerLogSemantics) {
    const auto spec = staged("p", {{task("a")}});
    EXPECT_EQ(collect_failures(failures_log({{"a", EventKind::TaskFailed}}), {spec}, false).size(), 1u);
    EXPECT_TRUE(collect_failures(failures_log({{"a", EventKind::TaskDone}}), {spec}, false).empty());
}

TEST(CollectFailures, CanceledOnlyWhenFlagged) {
    const auto spec = staged("p", {{task("a"), task("b")}});
    const auto log = failures_log({{"a", EventKind::TaskCanceled}, {"b", EventKind::TaskFailed}});
    EXPECT_EQ(collect_failures(log, {spec}, false).size(), 1u);
    const auto all = collect_failures(log, {spec}, true);
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(all[0].kind, FailureKind::Canceled);
}

TEST(CollectFailures, NodeFailureKind) {
    const auto spec = staged("p", {{task("a")}});
    auto log = failures_log({{"a", EventKind::TaskFailed}});
    log[4].detail = "node_failure node=3";
    EXPECT_EQ(collect_failures(log, {spec}, false).at(0).kind, FailureKind::NodeFailure);
}

TEST(CollectFailures, Errors) {
    const auto spec = staged("p", {{task("a")}});
    auto log = failures_log({{"a", EventKind::TaskFailed}});
    log.pop_back();
    EXPECT_THROW(collect_failures(log, {spec}, false), IncompleteLog);
    EXPECT_THROW(collect_failures(failures_log({{"zz", EventKind::TaskFailed}}), {spec}, false), MalformedLog);
}

TEST(Plan, EightExaConstitFailuresRequest64Nodes) {
    std::vector<TaskDescription> tasks;
    std::vector<FailureRecord> recs;
    for (int i = 0; i < 100; ++i) {
        tasks.push_back(task("e" + std::to_string(i), 64, 7, 1));
        if (i < 8) recs.push_back(record("e" + std::to_string(i), 0));
    }
    const auto plan = plan_resubmission(recs, {staged("p", {tasks})}, frontier_sim_profile(), {8000, 12000});
    EXPECT_EQ(plan.allocation.nodes, 64);
    EXPECT_EQ(plan.allocation.walltime_s, 7200);   // tier for ≤ 91 nodes
    ASSERT_EQ(plan.workflows.size(), 1u);
    EXPECT_EQ(plan.workflows[0].task_count(), 8u);
    EXPECT_EQ(plan.attempt, 2);
    EXPECT_TRUE(plan.feasible);
}

TEST(Plan, PreservesStageOrder) {
    const auto spec = staged("p", {{task("y"), task("y2")}, {task("m")}, {task("x")}});
    const auto plan =
        plan_resubmission({record("x", 2), record("y", 0)}, {spec}, frontier_sim_profile(), {10, 3600});
    ASSERT_EQ(plan.workflows.size(), 1u);
    const auto& st = plan.workflows[0].stages;
    ASSERT_EQ(st.size(), 2u);
    EXPECT_EQ(st[0].name, "p-s0");
    EXPECT_EQ(st[0].tasks.at(0).uid(), "y");
    EXPECT_EQ(st[1].name, "p-s2");
    EXPECT_EQ(st[1].tasks.at(0).uid(), "x");
    for (const auto& s : st)
        for (const auto& t : s.tasks) EXPECT_EQ(t.state, TaskState::New);
}

TEST(Plan, SingleOneNodeTask) {
    const auto plan = plan_resubmission({record("a", 0)}, {staged("p", {{task("a", 8)}})}, frontier_sim_profile(),
                                        {100, 3600});
    EXPECT_EQ(plan.allocation.nodes, 1);
    EXPECT_EQ(plan.allocation.walltime_s, 3600);
}

TEST(Plan, NeverAboveOriginalAllocation) {
    std::vector<TaskDescription> tasks;
    std::vector<FailureRecord> recs;
    for (int i = 0; i < 10; ++i) {
        tasks.push_back(task("e" + std::to_string(i), 64, 7, 1));
        recs.push_back(record("e" + std::to_string(i), 0));
    }
    const auto plan = plan_resubmission(recs, {staged("p", {tasks})}, frontier_sim_profile(), {16, 7200});
    EXPECT_EQ(plan.allocation.nodes, 16);
}

TEST(Plan, FeasibilityFromExpectedRuntimes) {
    const auto spec = staged("p", {{task("a", 8, 7, 1, 5000)}, {task("b", 8, 7, 1, 5000)}});
    const auto plan =
        plan_resubmission({record("a", 0), record("b", 1)}, {spec}, frontier_sim_profile(), {10, 7200});
    EXPECT_EQ(plan.estimated_runtime_s, 85 + 10000);
    EXPECT_FALSE(plan.feasible);
}

TEST(Plan, Errors) {
    const auto spec = staged("p", {{task("a")}});
    EXPECT_THROW(plan_resubmission({}, {spec}, frontier_sim_profile(), {1, 100}), EmptyPlan);
    auto tiny = frontier_sim_profile();
    tiny.node_count = 4;
    tiny.policy.tiers = {{4, 100}};
    const auto wide = staged("p", {{task("w", 64, 7, 1)}});
    EXPECT_THROW(plan_resubmission({record("w", 0)}, {wide}, tiny, {8, 100}), Unplaceable);
}

TEST(Plan, SidecarDocument) {
    const auto plan = plan_resubmission({record("a", 0)}, {staged("p", {{task("a")}})}, frontier_sim_profile(),
                                        {4, 3600}, 1, "attempt-1.events.jsonl");
    const auto j = nlohmann::json::parse(dump_plan_sidecar(plan));
    EXPECT_EQ(j.at("attempt"), 2);
    EXPECT_EQ(j.at("parent_log"), "attempt-1.events.jsonl");
    EXPECT_EQ(j.at("allocation").at("nodes"), 1);
    EXPECT_EQ(j.at("allocation").at("walltime_s"), 3600.0);
}

TEST(RetryLoop, PersistentBadNodeThenCleanAttempt) {
    std::vector<TaskDescription> tasks;
    for (int i = 0; i < 40; ++i) tasks.push_back(task("e" + std::to_string(i), 64, 7, 1));
    SimConfig c;
    c.allocation_nodes = 80;
    c.walltime_s = 7200;
    c.runtime.default_distribution = RuntimeDistribution::fixed(600);
    c.failures.faults = {Fault::persistent_node(17, 60)};
    const auto out = retry_loop_simulated({staged("p", {tasks})}, frontier_sim_profile(), c, 2);
    ASSERT_EQ(out.logs.size(), 2u);
    EXPECT_TRUE(out.unresolved.empty());
    ASSERT_EQ(out.plans.size(), 1u);
    const auto failed = collect_failures(out.logs[0], {staged("p", {tasks})}, false);
    EXPECT_GE(failed.size(), 2u);   // the bad node keeps killing later placements
    EXPECT_EQ(out.plans[0].workflows[0].task_count(), failed.size());
}

TEST(RetryLoop, DeterministicTaskFaultStaysUnresolved) {
    SimConfig c;
    c.allocation_nodes = 2;
    c.walltime_s = 3600;
    c.runtime.default_distribution = RuntimeDistribution::fixed(10);
    c.failures.faults = {Fault::task_fault("bad", 0.5)};
    const auto spec = staged("p", {{task("ok", 1, 1, 0), task("bad", 1, 1, 0)}, {task("after", 1, 1, 0)}});
    const auto out = retry_loop_simulated({spec}, frontier_sim_profile(), c, 3);
    EXPECT_EQ(out.logs.size(), 3u);
    ASSERT_EQ(out.unresolved.size(), 1u);
    EXPECT_EQ(out.unresolved[0].uid, "bad");
}

TEST(RetryLoop, NoFailuresOneLog) {
    SimConfig c;
    c.allocation_nodes = 1;
    c.walltime_s = 3600;
    const auto out = retry_loop_simulated({staged("p", {{task("a")}})}, frontier_sim_profile(), c, 5);
    EXPECT_EQ(out.logs.size(), 1u);
    EXPECT_TRUE(out.plans.empty());
    EXPECT_TRUE(out.unresolved.empty());
}

TEST(RetryLoop, CanceledRetriedOnlyWhenAsked) {
    SimConfig c;
    c.allocation_nodes = 1;
    c.walltime_s = 150;
    c.runtime.default_distribution = RuntimeDistribution::fixed(100);
    auto platform = frontier_sim_profile();
    platform.bootstrap_overhead_s = 0;
    const auto spec = staged("p", {{task("a", 8)}, {task("b", 8)}});
    const auto kept = retry_loop_simulated({spec}, platform, c, 3, false);
    EXPECT_EQ(kept.logs.size(), 1u);
    ASSERT_EQ(kept.unresolved.size(), 1u);
    EXPECT_EQ(kept.unresolved[0].kind, FailureKind::Canceled);
    const auto retried = retry_loop_simulated({spec}, platform, c, 3, true);
    EXPECT_EQ(retried.logs.size(), 2u);
    EXPECT_TRUE(retried.unresolved.empty());
}

// Random faults over many seeds: every original task ends up DONE in
// exactly one attempt or unresolved after the last one, plans only carry
// the previous attempt's failures in original stage order, and plans
// never grow the allocation.
TEST(RetryProperty, MultisetIdentityAndPlanShape) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        std::mt19937_64 rng(seed);
        const auto platform = ensemblekit::testing::small_platform(6);
        const auto specs = ensemblekit::testing::random_workflows(rng, 2, 3, 4, platform.node);
        SimConfig c;
        c.allocation_nodes = 6;
        c.walltime_s = 1e6;
        c.runtime.default_distribution = RuntimeDistribution::uniform(1, 30);
        c.runtime.seed = seed;
        c.failures.seed = seed;
        c.failures.random_task_fault_probability = 0.3;
        c.failures.faults = {Fault::persistent_node(static_cast<int>(seed % 6), 5)};
        const auto out = retry_loop_simulated(specs, platform, c, 1 + static_cast<int>(seed % 3));

        std::multiset<std::string> seen, original;
        for (const auto& w : specs)
            for (const auto& s : w.stages)
                for (const auto& t : s.tasks) original.insert(t.uid());
        for (const auto& log : out.logs)
            for (const auto& e : log)
                if (e.kind == EventKind::TaskDone) seen.insert(*e.task_uid);
        for (const auto& r : out.unresolved) seen.insert(r.uid);
        EXPECT_EQ(seen, original) << "seed " << seed;

        for (std::size_t k = 0; k < out.plans.size(); ++k) {
            const auto& plan = out.plans[k];
            EXPECT_LE(plan.allocation.nodes, c.allocation_nodes);
            const auto& prev = k == 0 ? specs : out.plans[k - 1].workflows;
            std::set<std::string> planned;
            for (const auto& w : plan.workflows) {
                const auto orig = std::find_if(specs.begin(), specs.end(),
                                               [&](const WorkflowSpec& s) { return s.name == w.name; });
                ASSERT_NE(orig, specs.end());
                std::size_t cursor = 0;
                for (const auto& st : w.stages) {
                    while (cursor < orig->stages.size() && orig->stages[cursor].name != st.name) ++cursor;
                    EXPECT_LT(cursor, orig->stages.size()) << "stage order broken in " << w.name;
                    for (const auto& t : st.tasks) EXPECT_TRUE(planned.insert(t.uid()).second);
                }
            }
            const auto failed = collect_failures(out.logs[k], prev, false);
            std::set<std::string> expect;
            for (const auto& r : failed) expect.insert(r.uid);
            EXPECT_EQ(planned, expect);
        }
    }
}
