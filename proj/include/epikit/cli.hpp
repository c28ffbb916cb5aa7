#pragma once

#include <ostream>

namespace epikit {

/// Entry point of the `epikit` command. Reports go to `out`, diagnostics and
/// the human summary to `err`. Returns 0 on success, 1 on runtime failure and
/// 2 on usage or configuration errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epikit
