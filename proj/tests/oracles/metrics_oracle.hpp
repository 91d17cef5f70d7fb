#pragma once

// Brute-force confusion counts, IoU and step-wise AP by direct enumeration.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const std::vector<int>& pred, const std::vector<int>& truth,
                    const std::vector<int>& valid) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid[i]) continue;
    if (pred[i] && truth[i]) ++c.tp;
    else if (pred[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline double ratio_or_one(double num, double den) { return den == 0 ? 1.0 : num / den; }

inline double iou_cloud(const Counts& c) { return ratio_or_one(c.tp, c.tp + c.fp + c.fn); }
inline double iou_clear(const Counts& c) { return ratio_or_one(c.tn, c.tn + c.fn + c.fp); }

// For every distinct confidence t, descending, predict cloud where conf >= t
// and recount from scratch. AP = sum (R_k - R_{k-1}) * P_k.
inline std::optional<double> ap(const std::vector<double>& conf, const std::vector<int>& truth,
                                const std::vector<int>& valid) {
  std::set<double, std::greater<>> thresholds;
  double positives = 0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    if (!valid[i]) continue;
    thresholds.insert(conf[i]);
    positives += truth[i];
  }
  if (positives == 0) return std::nullopt;
  double prev_recall = 0, sum = 0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      if (!valid[i] || conf[i] < t) continue;
      ++predicted;
      tp += truth[i];
    }
    const double recall = tp / positives;
    sum += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return sum;
}

}  // namespace oracle
