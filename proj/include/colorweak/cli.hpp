#pragma once

#include <iosfwd>

namespace colorweak {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Entry point of the `colorweak` tool, with injectable output streams.
/// Usage and configuration errors (bad flags, missing or malformed inputs,
/// artefacts missing for the chosen mode) return kExitUsage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace colorweak
