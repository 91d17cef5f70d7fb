#pragma once

// Shared fixtures for the acceptance runner and the pipeline unit tests.

#include <cstdint>
#include <filesystem>
#include <string>

namespace fixtures {

// Five-strip synthetic pipeline at desk scale. `epochs` and the network
// widths are the knobs the callers turn; everything else is fixed.
inline std::string pipeline_yaml(int epochs, const std::string& encoder = "[32, 64, 128, 256]",
                                 int bottleneck = 512,
                                 const std::string& decoder = "[256, 128, 64, 16]",
                                 std::uint32_t frame = 128, std::uint32_t patch = 64,
                                 std::uint32_t overlap = 16) {
  return "paths:\n"
         "  input_manifest: data/strips.txt\n"
         "  work_dir: work\n"
         "  output_dir: out\n"
         "seed: 20231\n"
         "patch:\n"
         "  size: " + std::to_string(patch) + "\n"
         "  overlap: " + std::to_string(overlap) + "\n"
         "texture:\n"
         "  levels: 32\n"
         "  windows: [3, 5, 15]\n"
         "unet:\n"
         "  in_channels: 52\n"
         "  classes: 2\n"
         "  encoder: " + encoder + "\n"
         "  bottleneck: " + std::to_string(bottleneck) + "\n"
         "  decoder: " + decoder + "\n"
         "train:\n"
         "  learning_rate: 0.005\n"
         "  class_weights: [0.3, 0.7]\n"
         "  epochs: " + std::to_string(epochs) + "\n"
         "  batch_size: 4\n"
         "  split: [0.6, 0.2, 0.2]\n"
         "  cloudy_only: true\n"
         "ensemble:\n"
         "  threshold: 0.1\n"
         "  dilation: [5, 5]\n"
         "pipeline:\n"
         "  holdout_strips: 2\n"
         "synth:\n"
         "  width: " + std::to_string(frame) + "\n"
         "  height: " + std::to_string(frame) + "\n"
         "  strip_count: 5\n"
         "  cloud_count: [2, 5]\n"
         "  cloud_radius: [5, 16]\n"
         "  footprint: [0.7, 1.0]\n";
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("demcloud_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
