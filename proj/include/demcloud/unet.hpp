#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "demcloud/grid.hpp"
#include "demcloud/tensor.hpp"
#include "demcloud/tensor_ops.hpp"

namespace demcloud::nn {

inline constexpr int kUNetDepth = 4;

struct UNetConfig {
  int in_channels = 52;
  int class_count = 2;
  std::vector<int> encoder{32, 64, 128, 256};
  int bottleneck = 512;
  std::vector<int> decoder{256, 128, 64, 16};

  void validate() const;
  // Input sides must be multiples of this.
  static constexpr int kSizeMultiple = 1 << kUNetDepth;
};

template <typename T>
struct Param {
  std::string name;
  // Weights are 4-D; biases are stored as (n, 1, 1, 1) and persisted as 1-D.
  Tensor4<T> value;
  Tensor4<T> grad;
  std::vector<T> m;
  std::vector<T> v;
  bool is_bias = false;
};

// All learnable tensors with Adam moments, in a fixed layer order:
// enc0..enc3 (conv1, conv2), mid (conv1, conv2), dec0..dec3 (up, conv1, conv2), head.
template <typename T>
struct UNetParams {
  std::vector<Param<T>> params;
  std::uint64_t step = 0;

  void zero_grad();
  std::size_t scalar_count() const;
  Param<T>* find(const std::string& name);
};

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases, zero moments.
template <typename T>
UNetParams<T> init_unet(const UNetConfig& cfg, std::uint64_t seed);

template <typename T>
struct EncoderCache {
  Tensor4<T> c1;
  Tensor4<T> c2;
  PoolResult<T> pool;
};

template <typename T>
struct DecoderCache {
  Tensor4<T> up;
  Tensor4<T> cat;
  Tensor4<T> d1;
  Tensor4<T> d2;
};

// Every intermediate activation of one forward pass.
template <typename T>
struct ForwardCache {
  Tensor4<T> input;
  std::array<EncoderCache<T>, kUNetDepth> enc;
  Tensor4<T> mid1;
  Tensor4<T> mid2;  // bottleneck features, (N, bottleneck, H/16, W/16)
  std::array<DecoderCache<T>, kUNetDepth> dec;
  Tensor4<T> logits;
  Tensor4<T> probs;
};

template <typename T>
ForwardCache<T> unet_forward(const UNetConfig& cfg, const UNetParams<T>& params,
                             const Tensor4<T>& x);

// Accumulates parameter gradients for the loss whose gradient with respect
// to the logits is `dlogits`. Returns the gradient with respect to the input.
template <typename T>
Tensor4<T> unet_backward(const UNetConfig& cfg, UNetParams<T>& params,
                         const ForwardCache<T>& cache, const Tensor4<T>& dlogits);

// Class-1 ("cloud") probability for every sample in the batch.
template <typename T>
std::vector<ConfidenceGrid> cloud_confidence(const Tensor4<T>& probs);

struct AdamConfig {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update for a flat parameter array; `step` is the
// 1-based step number after incrementing.
template <typename T>
void adam_update(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t step, const AdamConfig& cfg);

// Increments the step counter and updates every parameter from its grad.
// Throws InvariantError naming the parameter if any gradient is not finite.
template <typename T>
void adam_step(UNetParams<T>& params, const AdamConfig& cfg);

}  // namespace demcloud::nn
