#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace emotion::cli {

/// Runs one command line. Results go to `out`, logs and diagnostics to `err`.
/// Returns 0 on success, 1 on a runtime failure, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat key=value text; blank lines and lines starting with '#' are ignored.
/// Throws UsageError on a malformed line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

}  // namespace emotion::cli
