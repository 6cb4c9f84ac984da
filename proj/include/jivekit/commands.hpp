#pragma once

// Subcommands behind the jivekit executable. Each returns a process exit
// status: 0 ok, 2 bad input, 3 numerical failure, 1 anything else.

#include "jivekit/ajive.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace jivekit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<Backend> backend;
  std::optional<int> workers;
  std::optional<int> replications;
};

int cmd_decompose(const std::filesystem::path& manifest_path, const std::filesystem::path& config_path,
                  const std::filesystem::path& output_dir, const CommandOverrides& overrides,
                  std::ostream& err);

int cmd_simulate(const std::filesystem::path& study_path, const std::filesystem::path& output_dir,
                 const CommandOverrides& overrides, std::ostream& err);

int cmd_report(const std::filesystem::path& report_path, const std::filesystem::path& output_dir,
               std::ostream& err);

}  // namespace jivekit
