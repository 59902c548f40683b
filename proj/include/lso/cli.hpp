#pragma once

#include <iosfwd>

namespace lso {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `lso` tool. Subcommands: gen-data, dose-response,
/// fit-qsar, score, run, report. Returns 0 on success, 2 on bad flags or
/// configuration, 1 on runtime failure (with a one-line diagnostic on `err`).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lso
