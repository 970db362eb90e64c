#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ntkmmd::cli {

/// Exit codes of the command-line front end.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericalError = 3;

/// Runs one command line. `args` excludes the program name. Results go to
/// `out` unless --out names a file; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, const char* const* argv);

}  // namespace ntkmmd::cli
