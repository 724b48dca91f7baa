#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qms::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitCertifiedFailure = 2;

struct RunOptions {
  std::string command;
  std::filesystem::path scenario;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

const std::vector<std::string>& commands();

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

std::string library_version();

/// Loads the scenario, runs the command and writes report.json and witnesses.csv.
int run(const RunOptions& opts, std::ostream& log);

}  // namespace qms::cli
