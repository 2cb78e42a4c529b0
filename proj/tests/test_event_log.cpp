#include "ensemblekit/error.hpp"
#include "ensemblekit/event_log.hpp"
#include "ensemblekit/models.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace ensemblekit;

TEST(EventLog, LineFormatHasExactlyTheFiveFields) {
    const Event e{1.5, EventKind::TaskScheduled, std::string("a"), std::vector<int>{0, 3}, "cores=2 gpus=0"};
    EXPECT_EQ(dump_event(e),
              R"({"ts":1.5,"kind":"TASK_SCHEDULED","task_uid":"a","node_ids":[0,3],"detail":"cores=2 gpus=0"})");
    const Event j{0, EventKind::JobEnd, std::nullopt, std::nullopt, ""};
    EXPECT_EQ(dump_event(j), R"({"ts":0.0,"kind":"JOB_END","task_uid":null,"node_ids":null,"detail":""})");
}

TEST(EventLog, RoundTrip) {
    const EventLog log = {
        {0, EventKind::JobStart, std::nullopt, std::nullopt, "platform=x nodes=1"},
        {0.1, EventKind::BootstrapDone, std::nullopt, std::nullopt, ""},
        {0.1, EventKind::TaskScheduled, "a", std::vector<int>{0}, "cores=1 gpus=0"},
        {1.0 / 3.0, EventKind::TaskLaunched, "a", std::vector<int>{0}, ""},
        {2, EventKind::NodeFailed, std::nullopt, std::vector<int>{0}, "persistent"},
        {2, EventKind::TaskFailed, "a", std::vector<int>{0}, "node_failure node=0"},
        {2, EventKind::JobEnd, std::nullopt, std::nullopt, ""},
    };
    const auto text = dump_event_log(log);
    EXPECT_EQ(parse_event_log(text), log);
    EXPECT_EQ(dump_event_log(parse_event_log(text)), text);

    const auto path = std::filesystem::temp_directory_path() / "ek_roundtrip.jsonl";
    save_event_log(log, path);
    EXPECT_EQ(load_event_log(path), log);
}

TEST(EventLog, MalformedLines) {
    EXPECT_THROW(parse_event_log("{\"ts\":0}\n"), MalformedLog);
    EXPECT_THROW(parse_event_log(R"({"ts":0,"kind":"BOGUS","task_uid":null,"node_ids":null,"detail":""})"),
                 MalformedLog);
    try {
        parse_event_log(R"({"ts":0,"kind":"JOB_START","task_uid":null,"node_ids":null,"detail":""})"
                        "\nnot json\n",
                        "x.jsonl");
        FAIL();
    } catch (const MalformedLog& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
    }
}

TEST(EventLog, BlankLinesIgnored) {
    EXPECT_EQ(parse_event_log("\n" + dump_event({0, EventKind::JobEnd, {}, {}, ""}) + "\n\n").size(), 1u);
}

TEST(EventLog, RequireComplete) {
    EventLog log = {{0, EventKind::JobStart, {}, {}, ""}};
    EXPECT_FALSE(has_job_end(log));
    EXPECT_THROW(require_complete(log), IncompleteLog);
    log.push_back({1, EventKind::JobEnd, {}, {}, ""});
    EXPECT_NO_THROW(require_complete(log));
}

TEST(EventLog, JobInfoRoundTrip) {
    const JobInfo info{"frontier-sim", 8000, 56, 8, 12000, 2};
    const EventLog log = {{0, EventKind::JobStart, {}, {}, format_job_info(info)}};
    EXPECT_EQ(job_info(log), info);
    EXPECT_FALSE(job_info(EventLog{{0, EventKind::JobStart, {}, {}, ""}}));
}

TEST(EventLog, SlotDetail) {
    const auto d = parse_slot_detail(format_slot_detail({56, 8}));
    ASSERT_TRUE(d);
    EXPECT_EQ(d->cores, 56);
    EXPECT_EQ(d->gpus, 8);
    EXPECT_FALSE(parse_slot_detail("walltime"));
}

TEST(EventLog, ParseDetail) {
    const auto m = parse_detail("node_failure node=7");
    EXPECT_EQ(m.at("node_failure"), "");
    EXPECT_EQ(m.at("node"), "7");
}

TEST(EventLog, FormatDoubleRoundTrips) {
    for (double v : {0.0, 85.0, 0.1, 1.0 / 3.0, 8074.123456789012, 1e-300}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(85), "85");
}

TEST(RuntimeModel, FixedAndUniform) {
    TaskDescription d;
    d.uid = "x";
    RuntimeModel m;
    m.default_distribution = RuntimeDistribution::fixed(100);
    EXPECT_EQ(m.sample(d), 100);
    m.default_distribution = RuntimeDistribution::uniform(600, 1500);
    m.seed = 42;
    const double a = m.sample(d);
    EXPECT_GE(a, 600);
    EXPECT_LE(a, 1500);
    EXPECT_EQ(m.sample(d), a);
    m.seed = 43;
    EXPECT_NE(m.sample(d), a);
}

TEST(RuntimeModel, UniformMeanIsCentered) {
    RuntimeModel m;
    m.default_distribution = RuntimeDistribution::uniform(600, 1244);
    m.seed = 1;
    double sum = 0;
    const int n = 20000;
    TaskDescription d;
    for (int i = 0; i < n; ++i) {
        d.uid = "u" + std::to_string(i);
        sum += m.sample(d);
    }
    EXPECT_NEAR(sum / n, 922, 5);
}

TEST(RuntimeModel, PerClassAndExpected) {
    RuntimeModel m;
    m.by_class["sim"] = RuntimeDistribution::fixed(7);
    TaskDescription d;
    d.uid = "x";
    d.tags["class"] = "sim";
    EXPECT_EQ(m.sample(d), 7);
    d.tags.clear();
    d.stage_name = "sim";
    EXPECT_EQ(m.sample(d), 7);
    d.stage_name = "other";
    EXPECT_THROW(m.sample(d), ConfigError);
    d.expected_runtime_s = 12;
    EXPECT_EQ(m.sample(d), 12);
}

TEST(RuntimeModel, Validation) {
    RuntimeModel m;
    m.default_distribution = RuntimeDistribution::uniform(10, 5);
    EXPECT_THROW(m.validate(), ConfigError);
    m.default_distribution = RuntimeDistribution::fixed(0);
    EXPECT_THROW(m.validate(), ConfigError);
}

TEST(FailureModel, WithoutNodeFaults) {
    FailureModel f;
    f.faults = {Fault::persistent_node(1, 5), Fault::task_fault("a", 1.0), Fault::transient_node(2, 3)};
    const auto g = f.without_node_faults();
    ASSERT_EQ(g.faults.size(), 1u);
    EXPECT_EQ(g.faults[0].uid, "a");
}
