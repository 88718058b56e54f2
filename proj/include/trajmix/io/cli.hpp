#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace trajmix::io {

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "TRAJMIX_CONFIG";

// Rng streams derived from the run seed. Training draws from stream 1, rollouts from
// stream 0 and 1000 + i.
inline constexpr std::uint64_t kDataStream = 2;
inline constexpr std::uint64_t kInitStream = 3;
inline constexpr std::uint64_t kPredictStream = 4;

/// Runs one `trajmix` invocation; args[0] is the program name. Results go to `out`, a
/// one-line diagnostic to `err`. Returns the process exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trajmix::io
