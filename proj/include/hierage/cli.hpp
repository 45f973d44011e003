#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hierage {

constexpr const char* kVersion = "0.1.0";

// Runs one command line (args[0] is the program name). Returns 0 on success,
// 1 on a usage or validation error and 2 on a runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hierage
