#pragma once

#include <iosfwd>

namespace nvsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitRuntime = 4;

/// Entry point of the `nv` tool. Subcommands: sources, envelopes, trace,
/// envelope-mc, monitor, plan, ensemble, scan, reproduce.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace nvsim::cli
