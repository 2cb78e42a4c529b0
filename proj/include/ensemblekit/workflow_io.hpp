#pragma once

#include "ensemblekit/pst.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ensemblekit {

// Workflow documents are either a single pipeline object
// {name, stages:[{name, tasks:[...]}]} or a JSON array of such objects.

std::vector<WorkflowSpec> parse_workflows(const std::string& text,
                                          const std::string& source = "<workflow>");
std::string dump_workflows(const std::vector<WorkflowSpec>& specs);

/// Reads and validates; throws ParseError or ValidationError.
std::vector<WorkflowSpec> load_workflows(const std::filesystem::path& path);
void save_workflows(const std::vector<WorkflowSpec>& specs, const std::filesystem::path& path);

} // namespace ensemblekit
