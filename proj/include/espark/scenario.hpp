#pragma once

#include <cstdint>
#include <string>

#include "espark/types.hpp"

namespace espark {

/// Reads a scenario file (JSON, schema in docs/formats.md). Field names
/// match ScenarioConfig members one-to-one.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario_json(const std::string& text, const std::string& origin = "<inline>");
std::string scenario_to_json(const ScenarioConfig& config);

/// FNV-1a over file bytes; manifests use it to pin scenario content.
std::uint64_t hash_file_contents(const std::string& path);
std::uint64_t hash_bytes(const std::string& bytes);

}  // namespace espark
