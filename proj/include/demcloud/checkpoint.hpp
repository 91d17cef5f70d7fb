#pragma once

#include <filesystem>

#include "demcloud/unet.hpp"

namespace demcloud::nn {

// CFNN layout, little-endian:
//   "CFNN" | version u16 | in_channels u32 | class_count u32 |
//   encoder u32 x4 | bottleneck u32 | decoder u32 x4 | step u64 | block count u32 |
//   blocks: name length u16, name bytes, dim count u8, dims u32 x count, f32 data.
// Only parameter values are stored; Adam moments restart from zero on load.
void save_checkpoint(const std::filesystem::path& path, const UNetConfig& cfg,
                     const UNetParams<float>& params);

struct Checkpoint {
  UNetConfig config;
  UNetParams<float> params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace demcloud::nn
