#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demcloud/grid.hpp"

namespace demcloud {

// Cloud is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Counts over pixels where `valid` is 1 (all pixels when absent).
ConfusionMatrix confusion(const MaskGrid& pred, const MaskGrid& truth,
                          const MaskGrid* valid = nullptr);

struct IouStats {
  double cloud = 1.0;
  double clear = 1.0;
  double mean = 1.0;
};

// 0/0 counts as 1: a class absent from both prediction and truth.
IouStats iou(const ConfusionMatrix& cm);

// Empty optionals mark 0/0 ratios.
struct PrStats {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
};

PrStats pr_stats(const ConfusionMatrix& cm);

// Step-wise average precision over every distinct confidence, descending:
// sum over thresholds of (R_k - R_{k-1}) * P_k. Empty when the evaluated
// pixels contain no cloud.
std::optional<double> average_precision(const ConfidenceGrid& confidence, const MaskGrid& truth,
                                        const MaskGrid* valid = nullptr);

// Mean over frames for which AP is defined; empty if none is.
std::optional<double> mean_average_precision(std::span<const std::optional<double>> per_frame);

// Text block summarizing a confusion matrix.
std::string render_confusion(const ConfusionMatrix& cm);

}  // namespace demcloud
