#pragma once

#include <filesystem>
#include <string_view>

#include "atrophy/pbvc/pipeline.hpp"

namespace atrophy {

/// Sets one option by the key used in canonical_config_text, for example
/// "register.skull_weight" or "pbvc.quality_floor". Unknown keys and
/// unparsable values throw.
void apply_config_setting(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// INI or TOML text. Keys are either dotted ("pbvc.step_mm = 0.5") or bare
/// inside a section ("[pbvc]" then "step_mm = 0.5").
PipelineConfig parse_config_text(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

}  // namespace atrophy
