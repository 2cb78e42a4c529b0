#include "ensemblekit/error.hpp"
#include "ensemblekit/examples.hpp"
#include "ensemblekit/platform.hpp"
#include "ensemblekit/workflow_io.hpp"

#include <gtest/gtest.h>

using namespace ensemblekit;

namespace {

const Stage& stage_named(const WorkflowSpec& w, const std::string& name) {
    for (const auto& s : w.stages)
        if (s.name == name) return s;
    throw std::runtime_error("no stage " + name);
}

} // namespace

TEST(Examples, ExaCACartesianProduct) {
    ExampleParams p;
    p.cases = 5;
    p.uq_params = 4;
    const auto w = generate_example("exaca", p);
    const auto& s = stage_named(w, "exaca");
    EXPECT_EQ(s.tasks.size(), 20u);
    for (const auto& t : s.tasks)
        EXPECT_EQ(task_footprint(t.desc, frontier_sim_profile().node), (Footprint{1, 8}));
    EXPECT_EQ(w.stages.back().name, "exaca-analysis");
}

TEST(Examples, ExaConstitEnsemble) {
    ExampleParams p;
    p.tasks = 7875;
    const auto w = generate_example("exaconstit", p);
    const auto& s = stage_named(w, "exaconstit");
    ASSERT_EQ(s.tasks.size(), 7875u);
    for (const auto& t : s.tasks) {
        EXPECT_EQ(task_footprint(t.desc, frontier_sim_profile().node), (Footprint{8, 8}));
        ASSERT_TRUE(t.desc.expected_runtime_s);
        EXPECT_GE(*t.desc.expected_runtime_s, 600);
        EXPECT_LE(*t.desc.expected_runtime_s, 1500);
    }
    EXPECT_EQ(w.stages.size(), 2u);
    p.optimization = false;
    EXPECT_EQ(generate_example("exaconstit", p).stages.size(), 1u);
}

TEST(Examples, AdditiveFoamStructure) {
    ExampleParams p;
    p.tasks = 6;
    const auto w = generate_example("additivefoam", p);
    ASSERT_EQ(w.stages.size(), 4u);
    EXPECT_EQ(w.stages[0].name, "additivefoam-pre");
    EXPECT_EQ(w.stages[1].name, "additivefoam-even");
    EXPECT_EQ(w.stages[2].name, "additivefoam-odd");
    EXPECT_EQ(w.stages[3].name, "additivefoam-post");
    EXPECT_EQ(w.stages[1].tasks.size() + w.stages[2].tasks.size(), 6u);
    EXPECT_EQ(task_footprint(w.stages[1].tasks[0].desc, frontier_sim_profile().node), (Footprint{4, 56}));
}

TEST(Examples, UqStage1ChainsBoth) {
    const auto w = generate_example("uq-stage1");
    ASSERT_GE(w.stages.size(), 6u);
    EXPECT_EQ(w.stages.front().name, "additivefoam-pre");
    EXPECT_EQ(w.stages.back().name, "exaca-analysis");
}

TEST(Examples, ToyDegenerate) {
    ExampleParams p;
    p.stages = 0;
    EXPECT_THROW(generate_example("toy", p), ValidationError);
}

TEST(Examples, UnknownShape) { EXPECT_THROW(generate_example("tasmanian"), UnknownShape); }

TEST(Examples, EveryShapeValidatesAndRoundTrips) {
    for (const auto& shape : example_shapes()) {
        for (const char* mock : {"sleep", "handoff"}) {
            ExampleParams p;
            p.mock = mock;
            p.seed = 3;
            const auto w = generate_example(shape, p);
            EXPECT_TRUE(validate_workflow(w).ok()) << shape;
            EXPECT_EQ(dump_workflows(parse_workflows(dump_workflows({w}))), dump_workflows({w})) << shape;
        }
    }
}

TEST(Examples, SeedControlsExpectedRuntimes) {
    ExampleParams a, b;
    a.tasks = b.tasks = 20;
    a.seed = 1;
    b.seed = 2;
    EXPECT_EQ(dump_workflows({generate_example("exaconstit", a)}), dump_workflows({generate_example("exaconstit", a)}));
    EXPECT_NE(dump_workflows({generate_example("exaconstit", a)}), dump_workflows({generate_example("exaconstit", b)}));
}

TEST(Examples, UnknownMock) {
    ExampleParams p;
    p.mock = "nope";
    EXPECT_THROW(generate_example("toy", p), ConfigError);
}
