#include "demcloud/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "demcloud/raster_io.hpp"
#include "json.hpp"

namespace demcloud {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double point_noise(std::uint64_t seed, std::uint32_t x, std::uint32_t y) {
  return to_unit(splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(x) << 32 | y)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * to_unit(engine_()); }
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>((static_cast<unsigned __int128>(engine_()) * span) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

std::uint32_t grid_side(const SynthConfig& cfg) {
  std::uint32_t n = 1;
  while (n + 1 < std::max(cfg.width, cfg.height)) n *= 2;
  return n + 1;
}

double pass_amplitude(const SynthConfig& cfg, int pass) {
  if (cfg.octaves > 0 && pass >= cfg.octaves) return 0.0;
  return cfg.terrain_amplitude * std::pow(cfg.persistence, pass);
}

struct Blob {
  double cx, cy;
  double rx, ry;
  double cos_t, sin_t;    // rotation as a unit vector
  double h2c, h2s;        // second-harmonic boundary wobble
  double h3c, h3s;        // third-harmonic boundary wobble
  double offset;          // minimum raise inside the blob
  double dome;            // extra raise at the center
};

Blob sample_blob(Rng& rng, const SynthConfig& cfg, double radius_scale, double off_lo,
                 double off_hi, double dome_fraction) {
  Blob b{};
  b.cx = rng.uniform(0.0, cfg.width);
  b.cy = rng.uniform(0.0, cfg.height);
  b.rx = radius_scale * rng.uniform(cfg.cloud_radius_min, cfg.cloud_radius_max);
  b.ry = radius_scale * rng.uniform(cfg.cloud_radius_min, cfg.cloud_radius_max);
  double a = rng.uniform(-1.0, 1.0), c = rng.uniform(-1.0, 1.0);
  double n = std::sqrt(a * a + c * c);
  if (n < 1e-6) {
    a = 1.0;
    c = 0.0;
    n = 1.0;
  }
  b.cos_t = a / n;
  b.sin_t = c / n;
  b.h2c = rng.uniform(-0.12, 0.12);
  b.h2s = rng.uniform(-0.12, 0.12);
  b.h3c = rng.uniform(-0.12, 0.12);
  b.h3s = rng.uniform(-0.12, 0.12);
  b.offset = rng.uniform(off_lo, off_hi);
  b.dome = dome_fraction * b.offset;
  return b;
}

// Raise inside the blob at pixel center (x + 0.5, y + 0.5), or a negative
// value outside.
double blob_raise(const Blob& b, std::uint32_t x, std::uint32_t y) {
  const double dx = x + 0.5 - b.cx;
  const double dy = y + 0.5 - b.cy;
  const double u = (dx * b.cos_t + dy * b.sin_t) / b.rx;
  const double v = (-dx * b.sin_t + dy * b.cos_t) / b.ry;
  const double rho2 = u * u + v * v;
  if (rho2 > 2.25) return -1.0;
  const double rho = std::sqrt(rho2);
  double boundary = 1.0;
  if (rho > 0) {
    const double c = u / rho, s = v / rho;
    boundary += b.h2c * (c * c - s * s) + b.h2s * (2 * c * s) +
                b.h3c * (4 * c * c * c - 3 * c) + b.h3s * (3 * s - 4 * s * s * s);
  }
  if (rho >= boundary) return -1.0;
  const double t = rho / boundary;
  return b.offset + b.dome * (1.0 - t * t);
}

}  // namespace

void SynthConfig::validate() const {
  if (width < 16 || height < 16 || width % 16 != 0 || height % 16 != 0) {
    throw ConfigError("synth frame sides must be positive multiples of 16");
  }
  if (strip_count < 1) throw ConfigError("synth.strip_count must be at least 1");
  if (!std::isfinite(nodata)) throw ConfigError("synth.nodata must be finite");
  if (terrain_amplitude < 0 || persistence < 0 || persistence >= 1) {
    throw ConfigError("synth terrain requires amplitude >= 0 and persistence in [0, 1)");
  }
  if (octaves < 0) throw ConfigError("synth.octaves must be non-negative");
  if (clouds_min < 0 || clouds_max < clouds_min) {
    throw ConfigError("synth cloud count range is invalid");
  }
  if (!(cloud_radius_min > 0) || cloud_radius_max < cloud_radius_min) {
    throw ConfigError("synth cloud radius range is invalid");
  }
  if (cloud_offset_max < cloud_offset_min || haze_offset_max < haze_offset_min) {
    throw ConfigError("synth offset ranges are invalid");
  }
  const double relief_floor = 3.0 * terrain_amplitude;
  if (!(cloud_offset_min > relief_floor) || !(haze_offset_min > relief_floor)) {
    throw ConfigError("synth cloud and haze offsets must exceed 3x terrain_amplitude (" +
                      std::to_string(relief_floor) + " m)");
  }
  if (haze_probability < 0 || haze_probability > 1) {
    throw ConfigError("synth.haze_probability must lie in [0, 1]");
  }
  if (!(footprint_min > 0) || footprint_max > 1 || footprint_max < footprint_min) {
    throw ConfigError("synth footprint fractions must satisfy 0 < min <= max <= 1");
  }
}

double terrain_relief_bound(const SynthConfig& cfg) {
  const std::uint32_t n = grid_side(cfg);
  int passes = 1;
  for (std::uint32_t step = n - 1; step > 1; step /= 2) passes += 2;
  double sum = 0;
  for (int p = 0; p < passes; ++p) sum += pass_amplitude(cfg, p);
  return sum;
}

DemGrid gen_terrain(const SynthConfig& cfg) {
  cfg.validate();
  const std::uint32_t n = grid_side(cfg);
  std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
  auto at = [&](std::uint32_t x, std::uint32_t y) -> double& {
    return h[static_cast<std::size_t>(y) * n + x];
  };
  const std::uint64_t seed = splitmix64(cfg.seed ^ 0x7E55A11Aull);
  auto displace = [&](int pass, std::uint32_t x, std::uint32_t y) {
    const double a = pass_amplitude(cfg, pass);
    return a == 0.0 ? 0.0 : (point_noise(seed, x, y) - 0.5) * a;
  };

  int pass = 0;
  for (std::uint32_t y : {0u, n - 1}) {
    for (std::uint32_t x : {0u, n - 1}) at(x, y) = cfg.base_elevation + displace(pass, x, y);
  }
  ++pass;
  for (std::uint32_t step = n - 1; step > 1; step /= 2, pass += 2) {
    const std::uint32_t half = step / 2;
    for (std::uint32_t y = half; y < n; y += step) {
      for (std::uint32_t x = half; x < n; x += step) {
        const double avg = (at(x - half, y - half) + at(x + half, y - half) +
                            at(x - half, y + half) + at(x + half, y + half)) / 4.0;
        at(x, y) = avg + displace(pass, x, y);
      }
    }
    for (std::uint32_t y = 0; y < n; y += half) {
      for (std::uint32_t x = ((y / half) % 2 == 0) ? half : 0; x < n; x += step) {
        double sum = 0;
        int count = 0;
        if (x >= half) { sum += at(x - half, y); ++count; }
        if (x + half < n) { sum += at(x + half, y); ++count; }
        if (y >= half) { sum += at(x, y - half); ++count; }
        if (y + half < n) { sum += at(x, y + half); ++count; }
        at(x, y) = sum / count + displace(pass + 1, x, y);
      }
    }
  }

  DemGrid out(cfg.width, cfg.height, cfg.nodata);
  for (std::uint32_t y = 0; y < cfg.height; ++y) {
    for (std::uint32_t x = 0; x < cfg.width; ++x) out(x, y) = static_cast<float>(at(x, y));
  }
  return out;
}

CloudInjection inject_clouds(const DemGrid& terrain, const SynthConfig& cfg) {
  cfg.validate();
  if (terrain.width() != cfg.width || terrain.height() != cfg.height) {
    throw DataError("inject_clouds: terrain does not match the configured frame");
  }
  Rng rng(splitmix64(cfg.seed ^ 0xC10D5ull));
  std::vector<Blob> blobs;
  const int count = rng.integer(cfg.clouds_min, cfg.clouds_max);
  for (int i = 0; i < count; ++i) {
    blobs.push_back(sample_blob(rng, cfg, 1.0, cfg.cloud_offset_min, cfg.cloud_offset_max, 0.3));
  }
  if (cfg.haze_probability > 0 && rng.uniform(0.0, 1.0) < cfg.haze_probability) {
    blobs.push_back(sample_blob(rng, cfg, 2.5, cfg.haze_offset_min, cfg.haze_offset_max, 0.02));
  }

  CloudInjection out{terrain, MaskGrid(terrain.width(), terrain.height(), 0)};
  for (std::uint32_t y = 0; y < terrain.height(); ++y) {
    for (std::uint32_t x = 0; x < terrain.width(); ++x) {
      if (!terrain.valid(x, y)) continue;
      double raise = -1.0;
      for (const auto& b : blobs) raise = std::max(raise, blob_raise(b, x, y));
      if (raise <= 0) continue;
      const float v = static_cast<float>(static_cast<double>(terrain(x, y)) + raise);
      if (v != terrain(x, y)) {
        out.grid(x, y) = v;
        out.truth(x, y) = 1;
      }
    }
  }
  return out;
}

SynthDataset gen_dataset(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset data;
  data.terrain = gen_terrain(cfg);
  Rng rng(splitmix64(cfg.seed ^ 0x5781Bull));
  for (int i = 0; i < cfg.strip_count; ++i) {
    SynthConfig strip_cfg = cfg;
    strip_cfg.seed = splitmix64(cfg.seed + 0x1000 + static_cast<std::uint64_t>(i));
    auto clouds = inject_clouds(data.terrain, strip_cfg);

    const auto fw = static_cast<std::uint32_t>(
        std::lround(rng.uniform(cfg.footprint_min, cfg.footprint_max) * cfg.width));
    const auto fh = static_cast<std::uint32_t>(
        std::lround(rng.uniform(cfg.footprint_min, cfg.footprint_max) * cfg.height));
    const auto x0 = static_cast<std::uint32_t>(rng.integer(0, static_cast<int>(cfg.width - fw)));
    const auto y0 = static_cast<std::uint32_t>(rng.integer(0, static_cast<int>(cfg.height - fh)));

    DemGrid strip(cfg.width, cfg.height, cfg.nodata);
    for (std::uint32_t y = y0; y < y0 + fh; ++y) {
      for (std::uint32_t x = x0; x < x0 + fw; ++x) strip(x, y) = clouds.grid(x, y);
    }
    const DemGrid empty(cfg.width, cfg.height, cfg.nodata);
    const auto motion = motion_mask(empty, strip);
    data.truth.push_back(clip_mask(clouds.truth, motion));
    data.overdrawn.push_back(std::move(clouds.truth));
    data.strips.push_back(Strip{i, std::move(strip)});
  }
  return data;
}

std::filesystem::path write_dataset(const SynthDataset& data, const SynthConfig& cfg,
                                    const std::filesystem::path& dir,
                                    const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  write_dem(data.terrain, dir / "terrain.cfdr");
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < data.strips.size(); ++i) {
    const auto t = std::to_string(data.strips[i].timestep);
    const auto strip_path = dir / ("strip_" + t + ".cfdr");
    const auto mask_path = dir / ("overdrawn_" + t + ".pgm");
    write_dem(data.strips[i].grid, strip_path);
    write_mask(data.overdrawn[i], mask_path);
    write_mask(data.truth[i], dir / ("truth_" + t + ".pgm"));
    entries.push_back({data.strips[i].timestep, strip_path, mask_path});
  }
  const auto manifest = dir / manifest_name;
  write_strip_manifest(manifest, entries);

  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["width"] = cfg.width;
  j["height"] = cfg.height;
  j["strip_count"] = cfg.strip_count;
  j["nodata"] = cfg.nodata;
  j["terrain"] = {{"base_elevation", cfg.base_elevation},
                  {"amplitude", cfg.terrain_amplitude},
                  {"persistence", cfg.persistence},
                  {"octaves", cfg.octaves},
                  {"relief_bound", terrain_relief_bound(cfg)}};
  j["clouds"] = {{"count", {cfg.clouds_min, cfg.clouds_max}},
                 {"radius", {cfg.cloud_radius_min, cfg.cloud_radius_max}},
                 {"offset_m", {cfg.cloud_offset_min, cfg.cloud_offset_max}}};
  j["haze"] = {{"probability", cfg.haze_probability},
               {"offset_m", {cfg.haze_offset_min, cfg.haze_offset_max}}};
  j["footprint"] = {cfg.footprint_min, cfg.footprint_max};
  write_text_file(dir / "synth.json", j.dump(2) + "\n");
  return manifest;
}

}  // namespace demcloud
