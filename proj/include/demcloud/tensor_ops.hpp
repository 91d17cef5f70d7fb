#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "demcloud/tensor.hpp"

namespace demcloud::nn {

// Cross-correlation. Weights are Cout x Cin x K x K, bias has Cout entries.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                          std::span<const T> bias, int stride, int pad);

template <typename T>
struct ConvGrads {
  Tensor4<T> dx;
  Tensor4<T> dw;
  std::vector<T> db;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                             const Tensor4<T>& dy, int stride, int pad);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

// Gradient through ReLU given the forward output.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& dy);

template <typename T>
struct PoolResult {
  Tensor4<T> y;
  // Flat input index of the selected element for each output element.
  std::vector<std::uint32_t> argmax;
};

// 2x2 window, stride 2. Ties go to the first element in row-major window order.
template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax,
                            const std::array<int, 4>& input_dims);

// Transposed convolution, kernel 2, stride 2. Weights are Cin x Cout x 2 x 2.
template <typename T>
Tensor4<T> upconv_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                          std::span<const T> bias);

template <typename T>
ConvGrads<T> upconv_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                             const Tensor4<T>& dy);

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

// Splits a gradient of concat_channels(a, b) back into its two parts.
template <typename T>
void split_channels(const Tensor4<T>& d, int channels_a, Tensor4<T>& da, Tensor4<T>& db);

template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits);

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> dlogits;
  // Number of pixels whose target-class probability was clamped at 1e-12.
  std::size_t clamped = 0;
};

// Mean over pixels of -w[y] * ln(p_y), with the exact gradient with respect
// to the logits that produced `probs`. `targets` holds one class label per
// pixel in N x H x W order.
template <typename T>
LossResult<T> weighted_ce_loss(const Tensor4<T>& probs, std::span<const std::uint8_t> targets,
                               std::span<const double> class_weights);

}  // namespace demcloud::nn
