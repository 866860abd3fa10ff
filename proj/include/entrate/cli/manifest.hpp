#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "entrate/cli/config.hpp"

namespace entrate::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string file_digest(const std::filesystem::path& path);

/// Common manifest fields: tool, config digest, RNG identity, creation time.
nlohmann::ordered_json base_manifest(const ExperimentConfig& cfg, std::string_view command);

/// `<output>.manifest.json` next to the output, with the output's digest added.
std::filesystem::path write_manifest(const std::filesystem::path& output, nlohmann::ordered_json manifest);

/// Checks a manifest against the output it describes and the config that
/// produced it. Returns an empty string when both match.
std::string verify_manifest(const std::filesystem::path& output, const ExperimentConfig& cfg);

}  // namespace entrate::cli
