#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "demcloud/grid.hpp"

namespace demcloud {

inline constexpr int kFeatureCount = 13;
inline constexpr int kOffsetCount = 4;
inline constexpr int kTextureChannels = kFeatureCount * kOffsetCount;

struct Offset {
  int dx;
  int dy;
};

// Unit displacement from the reference pixel to its neighbor.
inline constexpr std::array<Offset, kOffsetCount> kOffsets{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// Feature order within each offset's 13-channel block. Channel index is
// offset * kFeatureCount + feature.
enum class Feature : int {
  kContrast,
  kDissimilarity,
  kHomogeneity,
  kEnergy,
  kAsm,
  kEntropy,
  kCorrelation,
  kMean,
  kVariance,
  kMaxProbability,
  kClusterShade,
  kClusterProminence,
  kAutocorrelation,
};

const std::array<std::string_view, kFeatureCount>& feature_names();
std::vector<std::string> channel_names();

struct GlcmParams {
  int levels = 32;
  int window = 3;
  // Quantization bounds in elevation units.
  double min = 0.0;
  double max = 1.0;

  void validate() const;
};

inline constexpr std::int16_t kInvalidLevel = -1;
using GrayLevels = Raster<std::int16_t>;

// floor((clamp(v) - min) / (max - min) * levels), capped at levels - 1.
// Nodata maps to kInvalidLevel.
GrayLevels quantize(const DemGrid& grid, const GlcmParams& params);
std::int16_t quantize_value(double v, const GlcmParams& params);

class CooccurrenceMatrix {
 public:
  explicit CooccurrenceMatrix(int levels)
      : levels_(levels), p_(static_cast<std::size_t>(levels) * levels, 0.0) {}

  int levels() const { return levels_; }
  double& operator()(int i, int j) { return p_[static_cast<std::size_t>(i) * levels_ + j]; }
  double operator()(int i, int j) const {
    return p_[static_cast<std::size_t>(i) * levels_ + j];
  }
  std::uint64_t pair_count() const { return pairs_; }
  void set_pair_count(std::uint64_t n) { pairs_ = n; }
  // True when the window contributed no valid pair; all entries are zero.
  bool empty() const { return pairs_ == 0; }

 private:
  int levels_;
  std::vector<double> p_;
  std::uint64_t pairs_ = 0;
};

// Normalized co-occurrence matrix of the window centered on (cx, cy). The
// window is clipped at the image border; a pair counts only if both pixels
// lie inside the clipped window and carry a valid level.
CooccurrenceMatrix glcm_window(const GrayLevels& gray, std::uint32_t cx, std::uint32_t cy,
                               int window, Offset offset, int levels);

using FeatureVector = std::array<double, kFeatureCount>;

// Features of a normalized matrix; an empty matrix yields all zeros.
// Correlation is 0 when sigma_i * sigma_j <= 1e-12.
FeatureVector glcm_features(const CooccurrenceMatrix& m);

// kTextureChannels x height x width doubles, channel-major.
struct FeatureVolume {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;

  double& at(int c, std::uint32_t x, std::uint32_t y) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, std::uint32_t x, std::uint32_t y) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Per-pixel features for every offset, computed with an incrementally
// updated sliding-window histogram.
FeatureVolume texture_features(const DemGrid& patch, const GlcmParams& params);

// Dataset-level per-channel bounds for min-max normalization.
struct ChannelStats {
  std::vector<double> min;
  std::vector<double> max;

  bool empty() const { return min.empty(); }
  void update(const FeatureVolume& volume);
  void merge(const ChannelStats& other);
};

// Normalized texture stack: channels x height x width floats in [0,1].
class TextureStack {
 public:
  TextureStack() = default;
  TextureStack(std::uint32_t width, std::uint32_t height, std::uint32_t channels)
      : width_(width), height_(height), channels_(channels),
        values_(static_cast<std::size_t>(width) * height * channels, 0.0f) {}
  TextureStack(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
               std::vector<float> values);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t channels() const { return channels_; }
  float& at(std::uint32_t c, std::uint32_t x, std::uint32_t y) {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  float at(std::uint32_t c, std::uint32_t x, std::uint32_t y) const {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool operator==(const TextureStack&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t channels_ = 0;
  std::vector<float> values_;
};

// (v - min) / (max - min) clamped to [0,1]; constant channels map to 0.
TextureStack normalize(const FeatureVolume& volume, const ChannelStats& stats);

TextureStack texture_stack(const DemGrid& patch, const GlcmParams& params,
                           const ChannelStats& stats);

// CFTS layout, little-endian: the 18-byte CFDR header with magic "CFTS"
// (nodata field unused, written as 0), then channels u32, then
// channels*height*width f32, channel after channel.
void write_texture_stack(const TextureStack& stack, const std::filesystem::path& path);
TextureStack read_texture_stack(const std::filesystem::path& path);

}  // namespace demcloud
