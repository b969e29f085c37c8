#pragma once

#include <iosfwd>

namespace anchor {

/// Exit statuses of anchorctl.
enum ExitStatus : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitInvariant = 4,
};

/// Entry point of anchorctl. The summary record is printed to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace anchor
