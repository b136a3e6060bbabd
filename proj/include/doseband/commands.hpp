#pragma once

// Batch front end: generate -> train -> bounds / ci -> coverage.
//
// Exit codes: 0 success, 1 input error, 2 numeric or training failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace doseband {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumeric = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace doseband
