#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace progmoe::cli {

/// Exit codes: 0 success, 1 validation or usage error, 2 numerical divergence.
/// Errors are reported on `err` as one line: "error: <Kind>: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace progmoe::cli
