#pragma once

#include <iosfwd>

namespace ensemblekit::cli {

/// Exit codes: 0 success, 1 engine/outcome failure (including tasks that
/// remain failed), 2 configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ensemblekit::cli
