#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dkrg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `dkrg` command line. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or input errors, 1 on internal errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dkrg::cli
