#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gsocc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Entry point of the gsocc tool. Subcommands: splat, eval, fit, gen, bench,
// info. Returns 0 on success, 1 on usage errors, 2 on data errors.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

// argv[0] is supplied internally; args holds the subcommand and its flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsocc::cli
