#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gvm::cli {

// Exit codes of the gvm tool.
enum ExitCode : int {
  kSafe = 0,   // verify: no error reachable; run/replay/dump: success
  kError = 1,  // error found, fault, replay divergence, I/O or parse failure
  kBudget = 2, // state or step budget exhausted
  kUsage = 3,  // bad command line
};

// `args` excludes the program name.
int main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace gvm::cli
