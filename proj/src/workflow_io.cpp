#include "ensemblekit/workflow_io.hpp"

#include "json_util.hpp"

namespace ensemblekit {

using detail::json;

namespace {

json task_to_json(const TaskDescription& d) {
    json j = json::object();
    j["uid"] = d.uid;
    j["executable"] = d.executable;
    j["arguments"] = d.arguments;
    j["pre_exec"] = d.pre_exec;
    j["cpu_processes"] = d.cpu_processes;
    j["cpu_threads_per_process"] = d.cpu_threads_per_process;
    j["gpus_per_process"] = d.gpus_per_process;
    j["expected_runtime_s"] = d.expected_runtime_s ? json(*d.expected_runtime_s) : json(nullptr);
    j["tags"] = d.tags;
    return j;
}

TaskDescription task_from_json(const json& j, const std::string& stage_name) {
    TaskDescription d;
    d.uid = j.at("uid").get<std::string>();
    d.executable = j.at("executable").get<std::string>();
    d.arguments = j.value("arguments", std::vector<std::string>{});
    d.pre_exec = j.value("pre_exec", std::vector<std::string>{});
    d.cpu_processes = j.value("cpu_processes", 1);
    d.cpu_threads_per_process = j.value("cpu_threads_per_process", 1);
    d.gpus_per_process = j.value("gpus_per_process", 0);
    if (auto it = j.find("expected_runtime_s"); it != j.end() && !it->is_null())
        d.expected_runtime_s = it->get<double>();
    d.tags = j.value("tags", std::map<std::string, std::string>{});
    d.stage_name = stage_name;
    return d;
}

json pipeline_to_json(const WorkflowSpec& spec) {
    json stages = json::array();
    for (const auto& s : spec.stages) {
        json tasks = json::array();
        for (const auto& t : s.tasks) tasks.push_back(task_to_json(t.desc));
        stages.push_back({{"name", s.name}, {"tasks", std::move(tasks)}});
    }
    return {{"name", spec.name}, {"stages", std::move(stages)}};
}

WorkflowSpec pipeline_from_json(const json& j) {
    WorkflowSpec spec;
    spec.name = j.at("name").get<std::string>();
    for (const auto& js : j.at("stages")) {
        Stage stage;
        stage.name = js.at("name").get<std::string>();
        for (const auto& jt : js.at("tasks")) stage.tasks.emplace_back(task_from_json(jt, stage.name));
        spec.stages.push_back(std::move(stage));
    }
    return spec;
}

} // namespace

std::vector<WorkflowSpec> parse_workflows(const std::string& text, const std::string& source) {
    const json doc = detail::parse_json(text, source);
    return detail::convert(source, [&] {
        std::vector<WorkflowSpec> out;
        if (doc.is_array()) {
            for (const auto& j : doc) out.push_back(pipeline_from_json(j));
        } else {
            out.push_back(pipeline_from_json(doc));
        }
        return out;
    });
}

std::string dump_workflows(const std::vector<WorkflowSpec>& specs) {
    if (specs.size() == 1) return pipeline_to_json(specs.front()).dump(2) + "\n";
    json arr = json::array();
    for (const auto& s : specs) arr.push_back(pipeline_to_json(s));
    return arr.dump(2) + "\n";
}

std::vector<WorkflowSpec> load_workflows(const std::filesystem::path& path) {
    auto specs = parse_workflows(detail::read_file(path), path.string());
    auto v = validate_workflows(specs);
    if (!v.ok()) {
        std::string msg = path.string() + ":";
        for (const auto& s : v.violations) msg += "\n  " + s;
        throw ValidationError(msg);
    }
    return specs;
}

void save_workflows(const std::vector<WorkflowSpec>& specs, const std::filesystem::path& path) {
    detail::write_file(path, dump_workflows(specs));
}

} // namespace ensemblekit
