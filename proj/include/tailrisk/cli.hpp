#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tailrisk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

/// Runs the tailrisk command line (argv[0] is the program name).
int run_cli(int argc, const char* const* argv);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view text);

/// "# tailrisk <version> config=<hash> seed=<seed>"
std::string output_header(const std::string& resolved_config_json, std::uint64_t seed);

}  // namespace tailrisk
