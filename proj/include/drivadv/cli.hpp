#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drivadv::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Runs one subcommand (synth, train, rank, place, surface). `args` excludes
// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drivadv::cli
