#include "demcloud/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace demcloud {

ConfusionMatrix confusion(const MaskGrid& pred, const MaskGrid& truth, const MaskGrid* valid) {
  require_same_shape(pred, truth, "confusion");
  if (valid) require_same_shape(pred, *valid, "confusion (valid mask)");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) {
      ++cm.tp;
    } else if (p) {
      ++cm.fp;
    } else if (t) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

IouStats iou(const ConfusionMatrix& cm) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  IouStats s;
  s.cloud = ratio(cm.tp, cm.tp + cm.fp + cm.fn);
  s.clear = ratio(cm.tn, cm.tn + cm.fp + cm.fn);
  s.mean = 0.5 * (s.cloud + s.clear);
  return s;
}

PrStats pr_stats(const ConfusionMatrix& cm) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(cm.tp, cm.tp + cm.fp), ratio(cm.tp, cm.tp + cm.fn),
          ratio(cm.tp + cm.tn, cm.total())};
}

std::optional<double> average_precision(const ConfidenceGrid& confidence, const MaskGrid& truth,
                                        const MaskGrid* valid) {
  require_same_shape(confidence, truth, "average_precision");
  if (valid) require_same_shape(confidence, *valid, "average_precision (valid mask)");
  std::vector<std::pair<float, std::uint8_t>> scored;
  scored.reserve(confidence.size());
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    scored.emplace_back(confidence[i], truth[i]);
    positives += truth[i];
  }
  if (positives == 0) return std::nullopt;
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const float t = scored[i].first;
    for (; i < scored.size() && scored[i].first == t; ++i) {
      if (scored[i].second) {
        ++tp;
      } else {
        ++fp;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::optional<double> mean_average_precision(std::span<const std::optional<double>> per_frame) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& ap : per_frame) {
    if (ap) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string render_confusion(const ConfusionMatrix& cm) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "                 truth:cloud   truth:clear\n"
                "  pred:cloud   %13llu %13llu\n"
                "  pred:clear   %13llu %13llu\n",
                static_cast<unsigned long long>(cm.tp), static_cast<unsigned long long>(cm.fp),
                static_cast<unsigned long long>(cm.fn), static_cast<unsigned long long>(cm.tn));
  return buf;
}

}  // namespace demcloud
