#pragma once

#include <ostream>

namespace swp {

/// Runs the `swp` command line. Returns 0 on success, 1 on usage errors,
/// 2 on data or file-format errors, 3 on other runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace swp
