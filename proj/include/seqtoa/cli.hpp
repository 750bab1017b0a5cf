#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqtoa {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;       // I/O, JSON or schema problem, bad flags
inline constexpr int kExitEstimation = 2;  // numerical or estimation failure

// Runs one command line (without the program name). Reports go to `out`
// unless --output names a file; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqtoa
