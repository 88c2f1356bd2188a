#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace followup {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;
inline constexpr int kExitPartial = 3;

/// Entry point shared by the `followup` binary and the tests. `args` excludes the program
/// name. Subcommands: generate, filter, evaluate, synth, judge-data, validate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace followup
