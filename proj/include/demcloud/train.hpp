#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "demcloud/grid.hpp"
#include "demcloud/texture.hpp"
#include "demcloud/unet.hpp"

namespace demcloud::nn {

struct TrainConfig {
  std::vector<double> class_weights{0.3, 0.7};
  double learning_rate = 0.005;
  int epochs = 200;
  int batch_size = 4;
  std::array<double, 3> split{0.6, 0.2, 0.2};  // train, validation, test
  std::uint64_t seed = 0;

  void validate(const UNetConfig& net) const;
};

struct Sample {
  TextureStack input;
  MaskGrid target;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1, then train = round(f0 * n), validation =
// round(f1 * n), test = the rest. Throws if any part is empty.
DatasetSplit split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

// Uniform index in [0, n) from a 64-bit generator, identical on every platform.
std::uint64_t uniform_index(std::uint64_t random_bits, std::uint64_t n);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_miou = 0.0;
  // Training pixels whose true-class probability hit the 1e-12 loss floor.
  std::size_t clamped = 0;
};

struct TrainResult {
  UNetParams<float> params;  // weights from the epoch with the best validation mIoU
  std::vector<EpochMetrics> log;
  DatasetSplit split;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg,
                  const UNetConfig& net, const EpochCallback& on_epoch = {});

// Tab-separated `epoch train_loss val_loss val_miou`, one line per epoch.
std::string format_metrics_log(const std::vector<EpochMetrics>& log);

// Packs texture stacks into an N x C x H x W tensor.
Tensor4<float> to_batch(const std::vector<const TextureStack*>& stacks);

ConfidenceGrid predict(const UNetConfig& net, const UNetParams<float>& params,
                       const TextureStack& input);

// Mean IoU over a subset of the dataset, predicting cloud where p >= 0.5.
double dataset_miou(const UNetConfig& net, const UNetParams<float>& params,
                    const std::vector<Sample>& dataset, const std::vector<std::size_t>& indices,
                    int batch_size);

}  // namespace demcloud::nn
