#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace climprice::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

// Runs one subcommand. `args` excludes the program name. Progress goes to
// `log` unless --quiet; errors always go to `err`.
int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err);

}  // namespace climprice::cli
