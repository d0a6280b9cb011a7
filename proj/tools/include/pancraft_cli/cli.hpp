#pragma once

#include <string>
#include <vector>

namespace pancraft::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Entry point shared by the executable and the tests. Subcommands:
/// gen-data, train, infer, eval, ablate.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace pancraft::cli
