#include "demcloud/ensemble.hpp"

#include <algorithm>
#include <vector>

namespace demcloud {

void EnsembleConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("ensemble.threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  if (kernel_width < 1 || kernel_height < 1 || kernel_width % 2 == 0 ||
      kernel_height % 2 == 0) {
    throw ConfigError("ensemble.dilation kernel sides must be odd and positive");
  }
}

ConfidenceGrid combine(std::span<const ConfidenceGrid> members) {
  if (members.empty()) throw DataError("combine: no ensemble members");
  for (const auto& m : members) require_same_shape(members.front(), m, "combine");
  ConfidenceGrid out(members.front().width(), members.front().height());
  // Floating-point products are not associative, so each pixel multiplies its
  // member values in sorted order; the result then ignores member order.
  std::vector<float> v(members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < members.size(); ++k) v[k] = members[k][i];
    std::sort(v.begin(), v.end());
    double p = 1.0;
    for (float f : v) p *= f;
    out[i] = static_cast<float>(p);
  }
  return out;
}

ConfidenceGrid combine(const ConfidenceGrid& a, const ConfidenceGrid& b,
                       const ConfidenceGrid& c) {
  const ConfidenceGrid members[] = {a, b, c};
  return combine(members);
}

MaskGrid threshold(const ConfidenceGrid& c, double t) {
  MaskGrid out(c.width(), c.height(), 0);
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] >= t ? 1 : 0;
  return out;
}

MaskGrid dilate(const MaskGrid& m, int kernel_width, int kernel_height) {
  if (kernel_width < 1 || kernel_height < 1 || kernel_width % 2 == 0 ||
      kernel_height % 2 == 0) {
    throw ConfigError("dilation kernel sides must be odd and positive");
  }
  const int w = static_cast<int>(m.width());
  const int h = static_cast<int>(m.height());
  const int rx = kernel_width / 2;
  const int ry = kernel_height / 2;
  // A box structuring element separates into a row pass and a column pass,
  // each a windowed count over prefix sums.
  MaskGrid rows(m.width(), m.height(), 0);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + m(x, y);
    for (int x = 0; x < w; ++x) {
      rows(x, y) = prefix[std::min(w, x + rx + 1)] - prefix[std::max(0, x - rx)] > 0;
    }
  }
  MaskGrid out(m.width(), m.height(), 0);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows(x, y);
    for (int y = 0; y < h; ++y) {
      out(x, y) = prefix[std::min(h, y + ry + 1)] - prefix[std::max(0, y - ry)] > 0;
    }
  }
  return out;
}

MaskGrid ensemble_mask(std::span<const ConfidenceGrid> members, const EnsembleConfig& cfg) {
  cfg.validate();
  return dilate(threshold(combine(members), cfg.threshold), cfg.kernel_width, cfg.kernel_height);
}

}  // namespace demcloud
