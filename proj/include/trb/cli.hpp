#pragma once

namespace trb::cli {

/// Parse argv, dispatch the subcommand, write artifacts + manifest.
/// Returns the process exit status: 0 success, 2 validation error,
/// 3 numerical failure.
int run(int argc, char** argv);

} // namespace trb::cli
