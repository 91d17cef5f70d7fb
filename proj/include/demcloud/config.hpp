#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demcloud/ensemble.hpp"
#include "demcloud/hillshade.hpp"
#include "demcloud/patching.hpp"
#include "demcloud/synth.hpp"
#include "demcloud/texture.hpp"
#include "demcloud/train.hpp"
#include "demcloud/unet.hpp"

namespace demcloud {

struct PathsConfig {
  std::filesystem::path input_manifest;
  std::filesystem::path work_dir;
  std::filesystem::path output_dir;
};

struct TextureConfig {
  int levels = 32;
  std::vector<int> windows{3, 5, 15};

  GlcmParams glcm(int window, double min, double max) const {
    return GlcmParams{levels, window, min, max};
  }
};

struct PipelineConfig {
  PathsConfig paths;
  std::uint64_t seed = 0;
  PatchSpec patch;
  TextureConfig texture;
  nn::UNetConfig unet;
  nn::TrainConfig train;
  bool cloudy_only = true;
  EnsembleConfig ensemble;
  // The last `holdout_strips` strips by timestep never reach training,
  // texture statistics or quantization bounds.
  int holdout_strips = 2;
  HillshadeParams hillshade;
  std::optional<SynthConfig> synth;
};

// Parses YAML text. Relative paths resolve against `base_dir`. Every field
// except the `synth` and `hillshade` sections is required; missing or unknown
// keys raise ConfigError naming the dotted field path.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Cross-field checks. With `check_paths`, the input manifest must exist
// unless a synth section will generate it.
void validate_config(const PipelineConfig& cfg, bool check_paths);

// Canonical JSON of every setting except `paths`.
std::string canonical_settings(const PipelineConfig& cfg);

// Hex SHA-256 of canonical_settings().
std::string config_hash(const PipelineConfig& cfg);

// Propagates the top-level seed into the training and synth seeds.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

std::string sha256_hex(const std::string& data);

}  // namespace demcloud
