#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "demcloud/error.hpp"

namespace demcloud::nn {

// Dense N x C x H x W volume, row-major.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, T fill = T{})
      : dims_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw InvariantError("negative tensor dimension");
  }

  int n() const { return dims_[0]; }
  int c() const { return dims_[1]; }
  int h() const { return dims_[2]; }
  int w() const { return dims_[3]; }
  const std::array<int, 4>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(dims_[2]) * dims_[3]; }
  std::size_t sample_size() const { return dims_[1] * plane(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* sample(int i) { return data_.data() + i * sample_size(); }
  const T* sample(int i) const { return data_.data() + i * sample_size(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator()(int in, int ic, int iy, int ix) {
    return data_[((static_cast<std::size_t>(in) * dims_[1] + ic) * dims_[2] + iy) * dims_[3] + ix];
  }
  T operator()(int in, int ic, int iy, int ix) const {
    return data_[((static_cast<std::size_t>(in) * dims_[1] + ic) * dims_[2] + iy) * dims_[3] + ix];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  bool same_dims(const Tensor4& o) const { return dims_ == o.dims_; }
  std::string shape_string() const {
    return std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "x" +
           std::to_string(dims_[2]) + "x" + std::to_string(dims_[3]);
  }

 private:
  std::array<int, 4> dims_{0, 0, 0, 0};
  std::vector<T> data_;
};

}  // namespace demcloud::nn
