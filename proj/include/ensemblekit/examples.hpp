#pragma once

#include "ensemblekit/pst.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ensemblekit {

/// Knobs for the example generators. Zero means "shape default".
struct ExampleParams {
    int tasks = 0;        // additivefoam: melt-pool cases; exaconstit: ensemble size; toy: tasks per stage
    int cases = 0;        // exaca / uq-stage1: melt-pool cases
    int uq_params = 0;    // exaca / uq-stage1: microstructure UQ parameter sets
    int stages = -1;      // toy only; -1 means default
    bool optimization = true;   // exaconstit: trailing optimization stage
    /// "sleep" runs `sleep <mock_sleep_s>`; "handoff" additionally checks
    /// that every task of the previous stage left its marker file.
    std::string mock = "sleep";
    double mock_sleep_s = 0.05;
    std::uint64_t seed = 0;
};

std::vector<std::string> example_shapes();

/// Builds one pipeline of the named shape: additivefoam, exaca, exaconstit,
/// uq-stage1 or toy. Throws UnknownShape or ValidationError.
WorkflowSpec generate_example(const std::string& shape, const ExampleParams& params = {});

} // namespace ensemblekit
