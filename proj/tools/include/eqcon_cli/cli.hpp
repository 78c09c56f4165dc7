#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eqcon::cli {

/// Runs the `eqcon` command line. Returns 0 on success, 1 on invalid input and
/// 2 on numeric failure; failures print one JSON line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eqcon::cli
