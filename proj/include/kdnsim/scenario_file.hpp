#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kdnsim/sim_engine.hpp"

namespace kdnsim {

inline constexpr int kScenarioFormatVersion = 1;

struct ParsedScenario {
  Scenario scenario;
  /// Hex SHA-256 of the exact bytes parsed.
  std::string sha256;
};

/// Parses the sectioned `key = value` scenario format documented in
/// docs/scenario-format.md. Omitted keys keep their defaults; unknown keys,
/// type mismatches and violated constraints raise ConfigError naming the key
/// and line.
ParsedScenario parse_scenario_text(std::string_view text);
ParsedScenario parse_scenario(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace kdnsim
