#include "demcloud/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <set>

#include "demcloud/raster_io.hpp"
#include "json.hpp"

namespace demcloud {

namespace fs = std::filesystem;

namespace {

class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ConfigError("config: `" + name() + "` must be a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  Section section(const std::string& key) {
    seen_.insert(key);
    return Section(require(key), field(key));
  }

  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    auto n = require(key);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config: field `" + field(key) + "` has the wrong type");
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  // Rejects keys nobody asked for, which are almost always typos.
  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("config: unknown field `" + field(key) + "`");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string name() const { return path_.empty() ? "<root>" : path_; }

  YAML::Node require(const std::string& key) const {
    auto n = node_[key];
    if (!n || n.IsNull()) throw ConfigError("config: missing required field `" + field(key) + "`");
    return n;
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

SynthConfig parse_synth(Section s) {
  SynthConfig c;
  c.width = s.get<std::uint32_t>("width");
  c.height = s.get<std::uint32_t>("height");
  c.strip_count = s.get<int>("strip_count");
  c.nodata = s.get_or<float>("nodata", c.nodata);
  c.base_elevation = s.get_or("base_elevation", c.base_elevation);
  c.terrain_amplitude = s.get_or("terrain_amplitude", c.terrain_amplitude);
  c.persistence = s.get_or("persistence", c.persistence);
  c.octaves = s.get_or("octaves", c.octaves);
  if (s.has("cloud_count")) {
    auto v = s.get<std::vector<int>>("cloud_count");
    if (v.size() != 2) throw ConfigError("config: `synth.cloud_count` must be [min, max]");
    c.clouds_min = v[0];
    c.clouds_max = v[1];
  }
  auto pair = [&](const char* key, double& lo, double& hi) {
    if (!s.has(key)) return;
    auto v = s.get<std::vector<double>>(key);
    if (v.size() != 2) throw ConfigError("config: `" + s.field(key) + "` must be [min, max]");
    lo = v[0];
    hi = v[1];
  };
  pair("cloud_radius", c.cloud_radius_min, c.cloud_radius_max);
  pair("cloud_offset", c.cloud_offset_min, c.cloud_offset_max);
  pair("haze_offset", c.haze_offset_min, c.haze_offset_max);
  pair("footprint", c.footprint_min, c.footprint_max);
  c.haze_probability = s.get_or("haze_probability", c.haze_probability);
  s.finish();
  return c;
}

nlohmann::ordered_json synth_json(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"width", c.width},
          {"height", c.height},
          {"strip_count", c.strip_count},
          {"nodata", c.nodata},
          {"base_elevation", c.base_elevation},
          {"terrain_amplitude", c.terrain_amplitude},
          {"persistence", c.persistence},
          {"octaves", c.octaves},
          {"cloud_count", {c.clouds_min, c.clouds_max}},
          {"cloud_radius", {c.cloud_radius_min, c.cloud_radius_max}},
          {"cloud_offset", {c.cloud_offset_min, c.cloud_offset_max}},
          {"haze_probability", c.haze_probability},
          {"haze_offset", {c.haze_offset_min, c.haze_offset_max}},
          {"footprint", {c.footprint_min, c.footprint_max}}};
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML syntax error: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config: file is empty");
  Section top(root, "");
  PipelineConfig cfg;

  auto paths = top.section("paths");
  cfg.paths.input_manifest = resolve(base_dir, paths.get<std::string>("input_manifest"));
  cfg.paths.work_dir = resolve(base_dir, paths.get<std::string>("work_dir"));
  cfg.paths.output_dir = resolve(base_dir, paths.get<std::string>("output_dir"));
  paths.finish();

  cfg.seed = top.get<std::uint64_t>("seed");

  auto patch = top.section("patch");
  cfg.patch.size = patch.get<std::uint32_t>("size");
  cfg.patch.overlap = patch.get<std::uint32_t>("overlap");
  patch.finish();

  auto tex = top.section("texture");
  cfg.texture.levels = tex.get<int>("levels");
  cfg.texture.windows = tex.get<std::vector<int>>("windows");
  tex.finish();

  auto unet = top.section("unet");
  cfg.unet.in_channels = unet.get<int>("in_channels");
  cfg.unet.class_count = unet.get<int>("classes");
  cfg.unet.encoder = unet.get<std::vector<int>>("encoder");
  cfg.unet.bottleneck = unet.get<int>("bottleneck");
  cfg.unet.decoder = unet.get<std::vector<int>>("decoder");
  unet.finish();

  auto train = top.section("train");
  cfg.train.learning_rate = train.get<double>("learning_rate");
  cfg.train.class_weights = train.get<std::vector<double>>("class_weights");
  cfg.train.epochs = train.get<int>("epochs");
  cfg.train.batch_size = train.get<int>("batch_size");
  auto split = train.get<std::vector<double>>("split");
  if (split.size() != 3) throw ConfigError("config: `train.split` must list three fractions");
  cfg.train.split = {split[0], split[1], split[2]};
  cfg.cloudy_only = train.get<bool>("cloudy_only");
  train.finish();

  auto ens = top.section("ensemble");
  cfg.ensemble.threshold = ens.get<double>("threshold");
  auto kernel = ens.get<std::vector<int>>("dilation");
  if (kernel.size() != 2) throw ConfigError("config: `ensemble.dilation` must be [width, height]");
  cfg.ensemble.kernel_width = kernel[0];
  cfg.ensemble.kernel_height = kernel[1];
  ens.finish();

  auto pipe = top.section("pipeline");
  cfg.holdout_strips = pipe.get<int>("holdout_strips");
  pipe.finish();

  if (top.has("hillshade")) {
    auto hs = top.section("hillshade");
    cfg.hillshade.azimuth_deg = hs.get_or("azimuth", cfg.hillshade.azimuth_deg);
    cfg.hillshade.altitude_deg = hs.get_or("altitude", cfg.hillshade.altitude_deg);
    cfg.hillshade.z_factor = hs.get_or("z_factor", cfg.hillshade.z_factor);
    cfg.hillshade.cell_size = hs.get_or("cell_size", cfg.hillshade.cell_size);
    hs.finish();
  }
  if (top.has("synth")) cfg.synth = parse_synth(top.section("synth"));
  top.finish();

  apply_seed(cfg, cfg.seed);
  validate_config(cfg, false);
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    auto bytes = read_file_bytes(path);
    text.assign(bytes.begin(), bytes.end());
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(text, fs::absolute(path).parent_path());
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  if (cfg.synth) cfg.synth->seed = seed;
}

void validate_config(const PipelineConfig& cfg, bool check_paths) {
  auto wrap = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config: `") + field + "`: " + e.what());
    }
  };
  wrap("patch", [&] { cfg.patch.validate(); });
  if (cfg.patch.size % nn::UNetConfig::kSizeMultiple != 0) {
    throw ConfigError("config: `patch.size` must be a multiple of 16 for the network");
  }
  if (cfg.texture.windows.empty()) throw ConfigError("config: `texture.windows` is empty");
  for (std::size_t i = 0; i < cfg.texture.windows.size(); ++i) {
    const int w = cfg.texture.windows[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.texture.windows[j] == w) {
        throw ConfigError("config: `texture.windows` lists " + std::to_string(w) + " twice");
      }
    }
    wrap("texture", [&] { cfg.texture.glcm(w, 0.0, 1.0).validate(); });
  }
  wrap("unet", [&] { cfg.unet.validate(); });
  if (cfg.unet.in_channels != kTextureChannels) {
    throw ConfigError("config: `unet.in_channels` must be " + std::to_string(kTextureChannels) +
                      " to match the texture stack");
  }
  wrap("train", [&] { cfg.train.validate(cfg.unet); });
  wrap("ensemble", [&] { cfg.ensemble.validate(); });
  if (cfg.holdout_strips < 1) {
    throw ConfigError("config: `pipeline.holdout_strips` must be at least 1");
  }
  if (cfg.synth) {
    wrap("synth", [&] { cfg.synth->validate(); });
    if (cfg.synth->strip_count <= cfg.holdout_strips) {
      throw ConfigError("config: `synth.strip_count` must exceed `pipeline.holdout_strips`");
    }
  }
  if (check_paths && !cfg.synth && !fs::exists(cfg.paths.input_manifest)) {
    throw ConfigError("config: `paths.input_manifest` does not exist: " +
                      cfg.paths.input_manifest.string());
  }
}

std::string canonical_settings(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["patch"] = {{"size", cfg.patch.size}, {"overlap", cfg.patch.overlap}};
  j["texture"] = {{"levels", cfg.texture.levels},
                  {"windows", cfg.texture.windows},
                  {"channels", channel_names()}};
  j["unet"] = {{"in_channels", cfg.unet.in_channels},
               {"classes", cfg.unet.class_count},
               {"encoder", cfg.unet.encoder},
               {"bottleneck", cfg.unet.bottleneck},
               {"decoder", cfg.unet.decoder}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"class_weights", cfg.train.class_weights},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"split", cfg.train.split},
                {"cloudy_only", cfg.cloudy_only}};
  j["ensemble"] = {{"threshold", cfg.ensemble.threshold},
                   {"dilation", {cfg.ensemble.kernel_width, cfg.ensemble.kernel_height}}};
  j["pipeline"] = {{"holdout_strips", cfg.holdout_strips}};
  j["hillshade"] = {{"azimuth", cfg.hillshade.azimuth_deg},
                    {"altitude", cfg.hillshade.altitude_deg},
                    {"z_factor", cfg.hillshade.z_factor},
                    {"cell_size", cfg.hillshade.cell_size}};
  j["synth"] = cfg.synth ? synth_json(*cfg.synth) : nlohmann::ordered_json();
  return j.dump();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InvariantError("SHA-256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(canonical_settings(cfg)); }

}  // namespace demcloud
