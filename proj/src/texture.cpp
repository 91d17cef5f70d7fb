#include "demcloud/texture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "demcloud/raster_io.hpp"

namespace demcloud {

namespace {

constexpr double kSigmaFloor = 1e-12;

struct Entry {
  int i;
  int j;
  double p;
};

// Entries must be in row-major cell order so every sum runs in the same
// order as a dense scan.
FeatureVector features_from_entries(std::span<const Entry> entries) {
  FeatureVector f{};
  if (entries.empty()) return f;

  double mu_i = 0, mu_j = 0, contrast = 0, dissim = 0, homog = 0, asm_ = 0, entropy = 0,
         max_p = 0, autocorr = 0;
  for (const auto& e : entries) {
    const double d = e.i - e.j;
    mu_i += e.i * e.p;
    mu_j += e.j * e.p;
    contrast += e.p * d * d;
    dissim += e.p * std::abs(d);
    homog += e.p / (1.0 + d * d);
    asm_ += e.p * e.p;
    if (e.p > 0) entropy -= e.p * std::log(e.p);
    max_p = std::max(max_p, e.p);
    autocorr += e.p * e.i * e.j;
  }
  double var_i = 0, var_j = 0, cov = 0, shade = 0, prominence = 0;
  for (const auto& e : entries) {
    const double di = e.i - mu_i;
    const double dj = e.j - mu_j;
    const double s = di + dj;
    var_i += e.p * di * di;
    var_j += e.p * dj * dj;
    cov += e.p * di * dj;
    shade += e.p * s * s * s;
    prominence += e.p * s * s * s * s;
  }
  const double sigma = std::sqrt(var_i) * std::sqrt(var_j);

  f[static_cast<int>(Feature::kContrast)] = contrast;
  f[static_cast<int>(Feature::kDissimilarity)] = dissim;
  f[static_cast<int>(Feature::kHomogeneity)] = homog;
  f[static_cast<int>(Feature::kEnergy)] = std::sqrt(asm_);
  f[static_cast<int>(Feature::kAsm)] = asm_;
  f[static_cast<int>(Feature::kEntropy)] = entropy;
  f[static_cast<int>(Feature::kCorrelation)] = sigma > kSigmaFloor ? cov / sigma : 0.0;
  f[static_cast<int>(Feature::kMean)] = mu_i;
  f[static_cast<int>(Feature::kVariance)] = var_i;
  f[static_cast<int>(Feature::kMaxProbability)] = max_p;
  f[static_cast<int>(Feature::kClusterShade)] = shade;
  f[static_cast<int>(Feature::kClusterProminence)] = prominence;
  f[static_cast<int>(Feature::kAutocorrelation)] = autocorr;
  return f;
}

// Counts for one offset over the current window, with a list of nonzero cells.
class SlidingHistogram {
 public:
  explicit SlidingHistogram(int levels)
      : levels_(levels),
        counts_(static_cast<std::size_t>(levels) * levels, 0),
        slot_(counts_.size(), -1) {}

  void clear() {
    for (int cell : nonzero_) {
      counts_[cell] = 0;
      slot_[cell] = -1;
    }
    nonzero_.clear();
    total_ = 0;
  }

  void add(int i, int j) {
    const int cell = i * levels_ + j;
    if (counts_[cell]++ == 0) {
      slot_[cell] = static_cast<int>(nonzero_.size());
      nonzero_.push_back(cell);
    }
    ++total_;
  }

  void remove(int i, int j) {
    const int cell = i * levels_ + j;
    if (--counts_[cell] == 0) {
      const int s = slot_[cell];
      const int last = nonzero_.back();
      nonzero_[s] = last;
      slot_[last] = s;
      nonzero_.pop_back();
      slot_[cell] = -1;
    }
    --total_;
  }

  FeatureVector features(std::vector<int>& cells, std::vector<Entry>& entries) const {
    if (total_ == 0) return FeatureVector{};
    cells.assign(nonzero_.begin(), nonzero_.end());
    std::sort(cells.begin(), cells.end());
    entries.clear();
    const double total = static_cast<double>(total_);
    for (int cell : cells) {
      entries.push_back({cell / levels_, cell % levels_, counts_[cell] / total});
    }
    return features_from_entries(entries);
  }

 private:
  int levels_;
  std::vector<std::int32_t> counts_;
  std::vector<int> slot_;
  std::vector<int> nonzero_;
  std::int64_t total_ = 0;
};

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names{
      "contrast",      "dissimilarity",  "homogeneity",        "energy",
      "asm",           "entropy",        "correlation",        "mean",
      "variance",      "max_probability", "cluster_shade",     "cluster_prominence",
      "autocorrelation"};
  return names;
}

std::vector<std::string> channel_names() {
  std::vector<std::string> out;
  for (const auto& o : kOffsets) {
    const std::string suffix =
        "@(" + std::to_string(o.dx) + "," + std::to_string(o.dy) + ")";
    for (auto name : feature_names()) out.push_back(std::string(name) + suffix);
  }
  return out;
}

void GlcmParams::validate() const {
  if (levels < 2 || levels > 4096) {
    throw ConfigError("glcm levels must be in [2, 4096], got " + std::to_string(levels));
  }
  if (window < 3 || window % 2 == 0) {
    throw ConfigError("glcm window must be odd and >= 3, got " + std::to_string(window));
  }
  if (!(min < max) || !std::isfinite(min) || !std::isfinite(max)) {
    throw ConfigError("glcm quantization bounds are degenerate (min=" +
                      std::to_string(min) + ", max=" + std::to_string(max) + ")");
  }
}

std::int16_t quantize_value(double v, const GlcmParams& params) {
  const double c = std::clamp(v, params.min, params.max);
  const auto level =
      static_cast<int>(std::floor((c - params.min) / (params.max - params.min) * params.levels));
  return static_cast<std::int16_t>(std::min(level, params.levels - 1));
}

GrayLevels quantize(const DemGrid& grid, const GlcmParams& params) {
  params.validate();
  GrayLevels out(grid.width(), grid.height(), kInvalidLevel);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.is_nodata(grid[i])) out[i] = quantize_value(grid[i], params);
  }
  return out;
}

CooccurrenceMatrix glcm_window(const GrayLevels& gray, std::uint32_t cx, std::uint32_t cy,
                               int window, Offset offset, int levels) {
  CooccurrenceMatrix m(levels);
  const int r = window / 2;
  const int w = static_cast<int>(gray.width());
  const int h = static_cast<int>(gray.height());
  const int x0 = std::max(0, static_cast<int>(cx) - r);
  const int x1 = std::min(w - 1, static_cast<int>(cx) + r);
  const int y0 = std::max(0, static_cast<int>(cy) - r);
  const int y1 = std::min(h - 1, static_cast<int>(cy) + r);
  std::uint64_t pairs = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const int nx = x + offset.dx;
      const int ny = y + offset.dy;
      if (nx < x0 || nx > x1 || ny < y0 || ny > y1) continue;
      const int a = gray(x, y);
      const int b = gray(nx, ny);
      if (a == kInvalidLevel || b == kInvalidLevel) continue;
      m(a, b) += 1.0;
      ++pairs;
    }
  }
  m.set_pair_count(pairs);
  if (pairs > 0) {
    for (int i = 0; i < levels; ++i) {
      for (int j = 0; j < levels; ++j) m(i, j) /= static_cast<double>(pairs);
    }
  }
  return m;
}

FeatureVector glcm_features(const CooccurrenceMatrix& m) {
  const int levels = m.levels();
  std::vector<Entry> entries;
  double sum = 0;
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels; ++j) {
      const double p = m(i, j);
      if (p < 0 || !std::isfinite(p)) {
        throw DataError("co-occurrence matrix has an invalid entry at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
      sum += p;
      if (p > 0) entries.push_back({i, j, p});
    }
  }
  if (entries.empty()) return FeatureVector{};
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("co-occurrence matrix is not normalized (sum " + std::to_string(sum) + ")");
  }
  return features_from_entries(entries);
}

FeatureVolume texture_features(const DemGrid& patch, const GlcmParams& params) {
  params.validate();
  const int w = static_cast<int>(patch.width());
  const int h = static_cast<int>(patch.height());
  const int r = params.window / 2;
  if (w == 0 || h == 0) throw DataError("texture_features: empty patch");
  const auto gray = quantize(patch, params);

  FeatureVolume vol;
  vol.width = patch.width();
  vol.height = patch.height();
  vol.values.assign(static_cast<std::size_t>(kTextureChannels) * w * h, 0.0);

  std::vector<SlidingHistogram> hist(kOffsetCount, SlidingHistogram(params.levels));
  std::vector<int> cells;
  std::vector<Entry> entries;

  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(h - 1, y + r);
    for (int k = 0; k < kOffsetCount; ++k) {
      const auto off = kOffsets[k];
      auto& hk = hist[k];
      hk.clear();

      // Visits every pair whose leftmost column is `c` (leftmost == true) or
      // whose rightmost column is `c`, restricted to columns [a, b].
      auto visit_column = [&](int c, bool leftmost, int a, int b, auto&& fn) {
        const int u = leftmost ? c - std::min(0, off.dx) : c - std::max(0, off.dx);
        const int nu = u + off.dx;
        if (std::min(u, nu) < a || std::max(u, nu) > b) return;
        for (int v = y0; v <= y1; ++v) {
          const int nv = v + off.dy;
          if (nv < y0 || nv > y1) continue;
          const int gi = gray(u, v);
          const int gj = gray(nu, nv);
          if (gi == kInvalidLevel || gj == kInvalidLevel) continue;
          fn(gi, gj);
        }
      };

      int a = 0;
      int b = std::min(w - 1, r);
      for (int c = 0; c <= b; ++c) {
        visit_column(c, false, a, c, [&](int i, int j) { hk.add(i, j); });
      }
      for (int x = 0; x < w; ++x) {
        const int na = std::max(0, x - r);
        const int nb = std::min(w - 1, x + r);
        if (na > a) {
          visit_column(a, true, a, b, [&](int i, int j) { hk.remove(i, j); });
          a = na;
        }
        if (nb > b) {
          visit_column(nb, false, a, nb, [&](int i, int j) { hk.add(i, j); });
          b = nb;
        }
        const auto f = hk.features(cells, entries);
        for (int q = 0; q < kFeatureCount; ++q) vol.at(k * kFeatureCount + q, x, y) = f[q];
      }
    }
  }
  return vol;
}

void ChannelStats::update(const FeatureVolume& volume) {
  const std::size_t plane = static_cast<std::size_t>(volume.width) * volume.height;
  if (plane == 0) return;
  if (min.empty()) {
    min.assign(kTextureChannels, std::numeric_limits<double>::infinity());
    max.assign(kTextureChannels, -std::numeric_limits<double>::infinity());
  }
  for (int c = 0; c < kTextureChannels; ++c) {
    const double* p = volume.values.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      min[c] = std::min(min[c], p[i]);
      max[c] = std::max(max[c], p[i]);
    }
  }
}

void ChannelStats::merge(const ChannelStats& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  for (int c = 0; c < kTextureChannels; ++c) {
    min[c] = std::min(min[c], other.min[c]);
    max[c] = std::max(max[c], other.max[c]);
  }
}

TextureStack::TextureStack(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                           std::vector<float> values)
    : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw DataError("texture stack value count does not match its dimensions");
  }
}

TextureStack normalize(const FeatureVolume& volume, const ChannelStats& stats) {
  if (stats.empty()) {
    throw DataError("texture normalization requested without channel statistics");
  }
  if (stats.min.size() != kTextureChannels || stats.max.size() != kTextureChannels) {
    throw DataError("channel statistics must cover " + std::to_string(kTextureChannels) +
                    " channels");
  }
  TextureStack out(volume.width, volume.height, kTextureChannels);
  const std::size_t plane = static_cast<std::size_t>(volume.width) * volume.height;
  for (int c = 0; c < kTextureChannels; ++c) {
    const double lo = stats.min[c];
    const double span = stats.max[c] - lo;
    const double* src = volume.values.data() + c * plane;
    float* dst = out.values().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = span > 0 ? static_cast<float>(std::clamp((src[i] - lo) / span, 0.0, 1.0)) : 0.0f;
    }
  }
  return out;
}

TextureStack texture_stack(const DemGrid& patch, const GlcmParams& params,
                           const ChannelStats& stats) {
  if (stats.empty()) {
    throw DataError("texture normalization requested without channel statistics");
  }
  return normalize(texture_features(patch, params), stats);
}

void write_texture_stack(const TextureStack& stack, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  out.reserve(22 + stack.values().size() * 4);
  for (char c : {'C', 'F', 'T', 'S'}) out.push_back(static_cast<std::uint8_t>(c));
  le::put_u16(out, 1);
  le::put_u32(out, stack.width());
  le::put_u32(out, stack.height());
  le::put_f32(out, 0.0f);
  le::put_u32(out, stack.channels());
  for (float v : stack.values()) le::put_f32(out, v);
  write_file_bytes(path, out);
}

TextureStack read_texture_stack(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const auto origin = path.string();
  if (bytes.size() < 22) throw DataError(origin + ": truncated CFTS header");
  if (std::memcmp(bytes.data(), "CFTS", 4) != 0) {
    throw DataError(origin + ": bad magic, expected CFTS");
  }
  if (le::get_u16(bytes.data() + 4) != 1) throw DataError(origin + ": unsupported CFTS version");
  const auto w = le::get_u32(bytes.data() + 6);
  const auto h = le::get_u32(bytes.data() + 10);
  const auto c = le::get_u32(bytes.data() + 18);
  const std::uint64_t count = static_cast<std::uint64_t>(w) * h * c;
  if (bytes.size() != 22 + count * 4) throw DataError(origin + ": truncated CFTS payload");
  std::vector<float> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values[i] = le::get_f32(bytes.data() + 22 + 4 * i);
    if (!std::isfinite(values[i])) throw DataError(origin + ": non-finite texture value");
  }
  return TextureStack(w, h, c, std::move(values));
}

}  // namespace demcloud
