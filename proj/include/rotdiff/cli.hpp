#pragma once

namespace rotdiff {

/// Entry point for the rotdiff binary. Parses argv, dispatches the
/// subcommand, and maps failures onto exit codes: 0 success, 1 runtime
/// failure, 2 usage or config error.
int run_cli(int argc, char** argv);

}  // namespace rotdiff
