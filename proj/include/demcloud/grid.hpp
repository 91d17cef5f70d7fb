#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "demcloud/error.hpp"

namespace demcloud {

// Row-major single-channel raster, top row first.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(std::uint32_t width, std::uint32_t height, T fill = T{})
      : width_(width), height_(height),
        values_(static_cast<std::size_t>(width) * height, fill) {}
  Raster(std::uint32_t width, std::uint32_t height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(width) * height) {
      throw DataError("raster value count " + std::to_string(values_.size()) +
                      " does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(std::uint32_t x, std::uint32_t y) {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(std::uint32_t x, std::uint32_t y) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Raster&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<T> values_;
};

template <typename A, typename B>
bool same_shape(const Raster<A>& a, const Raster<B>& b) {
  return a.width() == b.width() && a.height() == b.height();
}

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!same_shape(a, b)) {
    throw DataError(std::string(what) + ": dimension mismatch " +
                    std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

// Elevation raster in meters. Every value is finite; absent samples hold
// exactly the nodata sentinel.
class DemGrid : public Raster<float> {
 public:
  static constexpr float kDefaultNodata = -9999.0f;

  DemGrid() = default;
  DemGrid(std::uint32_t width, std::uint32_t height, float nodata = kDefaultNodata)
      : Raster<float>(width, height, nodata), nodata_(nodata) {}
  DemGrid(std::uint32_t width, std::uint32_t height, float nodata,
          std::vector<float> values)
      : Raster<float>(width, height, std::move(values)), nodata_(nodata) {}

  float nodata() const { return nodata_; }
  bool is_nodata(float v) const { return v == nodata_; }
  bool valid(std::uint32_t x, std::uint32_t y) const {
    return !is_nodata((*this)(x, y));
  }

 private:
  float nodata_ = kDefaultNodata;
};

// Bit-level equality including the nodata sentinel.
inline bool bitwise_equal(const DemGrid& a, const DemGrid& b) {
  if (!same_shape(a, b)) return false;
  float na = a.nodata(), nb = b.nodata();
  if (std::memcmp(&na, &nb, sizeof(float)) != 0) return false;
  return a.size() == 0 ||
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

// Binary {0,1} raster.
class MaskGrid : public Raster<std::uint8_t> {
 public:
  using Raster<std::uint8_t>::Raster;
  MaskGrid() = default;
  explicit MaskGrid(Raster<std::uint8_t> r) : Raster<std::uint8_t>(std::move(r)) {}

  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto v : values()) n += v;
    return n;
  }
};

// Per-pixel class probability in [0,1].
class ConfidenceGrid : public Raster<float> {
 public:
  using Raster<float>::Raster;
  ConfidenceGrid() = default;
  explicit ConfidenceGrid(Raster<float> r) : Raster<float>(std::move(r)) {}
};

// 8-bit gray preview image (hillshade output).
using GrayImage = Raster<std::uint8_t>;

}  // namespace demcloud
