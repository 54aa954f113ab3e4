#pragma once

#include <iosfwd>

namespace mulma::cli {

/// Exit codes: 0 success, 1 configuration or validation error, 2 infeasible
/// scenario, 3 numerical or training failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mulma::cli
