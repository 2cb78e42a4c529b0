#include "ensemblekit/examples.hpp"

#include "ensemblekit/error.hpp"
#include "ensemblekit/event_log.hpp"
#include "ensemblekit/models.hpp"

#include <random>

namespace ensemblekit {

namespace {

std::string padded(int value, int width) {
    std::string s = std::to_string(value);
    if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
    return s;
}

double draw(std::uint64_t seed, const std::string& uid, double lo, double hi) {
    std::mt19937_64 gen(mix_seed(seed, uid));
    return lo + unit_interval(gen()) * (hi - lo);
}

class Builder {
public:
    Builder(std::string name, const ExampleParams& params) : params_(params) { spec_.name = std::move(name); }

    Stage& stage(const std::string& name) {
        spec_.stages.push_back({name, {}});
        return spec_.stages.back();
    }

    void task(Stage& stage, std::string uid, const std::string& cls, int procs, int threads, int gpus,
              double runtime_s) {
        TaskDescription d;
        d.uid = std::move(uid);
        d.cpu_processes = procs;
        d.cpu_threads_per_process = threads;
        d.gpus_per_process = gpus;
        d.expected_runtime_s = runtime_s;
        d.stage_name = stage.name;
        d.tags["class"] = cls;
        d.pre_exec = {"export OMP_NUM_THREADS=" + std::to_string(threads)};
        stage.tasks.emplace_back(std::move(d));
    }

    /// Fills in mock payload commands once all stages exist.
    WorkflowSpec finish() {
        std::vector<std::string> previous;
        for (auto& stage : spec_.stages) {
            std::vector<std::string> current;
            for (auto& t : stage.tasks) {
                const std::string sleep = format_double(params_.mock_sleep_s);
                if (params_.mock == "handoff") {
                    std::string script;
                    if (!previous.empty()) {
                        script += "for f in";
                        for (const auto& m : previous) script += " " + m;
                        script += "; do test -f \"$f\" || { echo \"missing $f\" >&2; exit 3; }; done; ";
                    }
                    script += "sleep " + sleep + "; touch " + t.uid() + ".done";
                    t.desc.executable = "/bin/sh";
                    t.desc.arguments = {"-c", script};
                } else {
                    t.desc.executable = "sleep";
                    t.desc.arguments = {sleep};
                }
                current.push_back(t.uid() + ".done");
            }
            previous = std::move(current);
        }
        return std::move(spec_);
    }

    const ExampleParams& params() const { return params_; }

private:
    ExampleParams params_;
    WorkflowSpec spec_;
};

// AdditiveFOAM: CPU-only melt-pool runs, 4 nodes x 56 ranks each, split into
// even and odd passes between a pre- and a post-processing step.
void add_additivefoam(Builder& b, int cases) {
    const auto seed = b.params().seed;
    auto& pre = b.stage("additivefoam-pre");
    b.task(pre, "additivefoam-pre", "additivefoam-pre", 1, 1, 0, 60);
    for (int parity = 0; parity < 2; ++parity) {
        if (cases <= parity) break;
        auto& s = b.stage(parity == 0 ? "additivefoam-even" : "additivefoam-odd");
        for (int c = parity; c < cases; c += 2) {
            const std::string uid = "additivefoam-case-" + padded(c, 3);
            b.task(s, uid, "additivefoam", 224, 1, 0, draw(seed, uid, 1800, 3600));
        }
    }
    auto& post = b.stage("additivefoam-post");
    b.task(post, "additivefoam-post", "additivefoam-post", 1, 1, 0, 120);
}

// ExaCA: one single-node 8 x (7 cores + 1 GPU) task per (melt-pool case,
// UQ parameter set) pair, then an analysis step.
void add_exaca(Builder& b, int cases, int uq_params) {
    const auto seed = b.params().seed;
    auto& s = b.stage("exaca");
    for (int c = 0; c < cases; ++c)
        for (int p = 0; p < uq_params; ++p) {
            const std::string uid = "exaca-c" + padded(c, 3) + "-p" + padded(p, 3);
            b.task(s, uid, "exaca", 8, 7, 1, draw(seed, uid, 1200, 2400));
        }
    auto& analysis = b.stage("exaca-analysis");
    b.task(analysis, "exaca-analysis", "exaca-analysis", 1, 1, 0, 300);
}

int positive_or(int value, int fallback, const char* what) {
    if (value < 0) throw ValidationError(std::string(what) + " must be ≥ 1");
    if (value == 0) return fallback;
    return value;
}

} // namespace

std::vector<std::string> example_shapes() {
    return {"additivefoam", "exaca", "exaconstit", "uq-stage1", "toy"};
}

WorkflowSpec generate_example(const std::string& shape, const ExampleParams& params) {
    if (params.mock != "sleep" && params.mock != "handoff")
        throw ConfigError("unknown mock payload '" + params.mock + "'");
    if (!(params.mock_sleep_s >= 0)) throw ConfigError("mock sleep must be ≥ 0");

    Builder b(shape, params);
    if (shape == "additivefoam") {
        add_additivefoam(b, positive_or(params.tasks, 10, "tasks"));
    } else if (shape == "exaca") {
        add_exaca(b, positive_or(params.cases, 25, "cases"), positive_or(params.uq_params, 5, "uq_params"));
    } else if (shape == "uq-stage1") {
        const int cases = positive_or(params.cases ? params.cases : params.tasks, 4, "cases");
        add_additivefoam(b, cases);
        add_exaca(b, cases, positive_or(params.uq_params, 3, "uq_params"));
    } else if (shape == "exaconstit") {
        const int n = positive_or(params.tasks, 7875, "tasks");
        auto& s = b.stage("exaconstit");
        const int width = std::max(5, static_cast<int>(std::to_string(n - 1).size()));
        for (int i = 0; i < n; ++i) {
            const std::string uid = "exaconstit-" + padded(i, width);
            // 64 ranks of 7 cores + 1 GPU: eight full Frontier-shaped nodes.
            b.task(s, uid, "exaconstit", 64, 7, 1, draw(params.seed, uid, 600, 1500));
        }
        if (params.optimization) {
            auto& opt = b.stage("optimization");
            b.task(opt, "optimization", "optimization", 1, 1, 0, 120);
        }
    } else if (shape == "toy") {
        const int stages = params.stages < 0 ? 2 : params.stages;
        if (stages == 0) throw ValidationError("toy workflow needs at least one stage");
        const int per_stage = positive_or(params.tasks, 3, "tasks");
        for (int s = 0; s < stages; ++s) {
            auto& st = b.stage("stage-" + std::to_string(s));
            for (int t = 0; t < per_stage; ++t)
                b.task(st, "toy-s" + std::to_string(s) + "-t" + std::to_string(t), "toy", 1, 1, 0, 10);
        }
    } else {
        throw UnknownShape("unknown example shape '" + shape + "'");
    }
    return b.finish();
}

} // namespace ensemblekit
