#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rnl/cli/config.hpp"

namespace rnl::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitToleranceFailure = 1;
inline constexpr int kExitError = 2;

// Parses `args` (without the program name), runs the subcommand and returns
// the exit status. Failures print one line "error[<kind>]: <message>" to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Individual subcommands; these throw rnl::Error on failure.
int run_block(const RunConfig& cfg, std::ostream& out);
int run_oracle(const RunConfig& cfg, std::ostream& out);
int run_gradcheck(const RunConfig& cfg, std::ostream& out);
int run_cost(const RunConfig& cfg, std::ostream& out);
int run_gen(const RunConfig& cfg, std::ostream& out);

}  // namespace rnl::cli
