#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace padeit::cli {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code: 0 on success, 1 when a
/// command fails (after printing one JSON error line to `err`), 2 on usage
/// errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace padeit::cli
