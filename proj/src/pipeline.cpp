#include "demcloud/pipeline.hpp"

#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>

#include "demcloud/checkpoint.hpp"
#include "demcloud/ensemble.hpp"
#include "demcloud/hillshade.hpp"
#include "demcloud/mosaic.hpp"
#include "demcloud/parallel.hpp"
#include "demcloud/patching.hpp"
#include "demcloud/raster_io.hpp"
#include "demcloud/synth.hpp"
#include "demcloud/texture.hpp"
#include "demcloud/train.hpp"
#include "json.hpp"

namespace demcloud {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void say(const RunOptions& opt, const std::string& msg) {
  if (opt.verbose) std::cerr << "[demcloud] " << msg << "\n";
}

void require_input(const fs::path& p, const char* producer) {
  if (!fs::exists(p)) {
    throw DataError("missing input " + p.string() + " (produced by the `" + producer + "` stage)");
  }
}

json read_json(const fs::path& p, const char* producer) {
  require_input(p, producer);
  auto bytes = read_file_bytes(p);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

std::string tag(std::int64_t t) { return std::to_string(t); }
std::string wtag(int w) { return "w" + std::to_string(w); }

struct FrameInfo {
  std::int64_t timestep = 0;
  bool has_truth = false;
  bool holdout = false;
};

fs::path mosaic_dir(const PipelineConfig& cfg) { return work_root(cfg) / "mosaic"; }
fs::path strip_path(const PipelineConfig& cfg, std::int64_t t) {
  return mosaic_dir(cfg) / ("strip_" + tag(t) + ".cfdr");
}
fs::path motion_path(const PipelineConfig& cfg, std::int64_t t) {
  return mosaic_dir(cfg) / ("motion_" + tag(t) + ".pgm");
}
fs::path truth_path(const PipelineConfig& cfg, std::int64_t t) {
  return mosaic_dir(cfg) / ("truth_" + tag(t) + ".pgm");
}
fs::path patch_dir(const PipelineConfig& cfg, std::int64_t t, const char* kind) {
  return work_root(cfg) / "patches" / tag(t) / kind;
}
fs::path texture_dir(const PipelineConfig& cfg, int w) { return work_root(cfg) / "texture" / wtag(w); }
fs::path model_path(const PipelineConfig& cfg, int w) {
  return work_root(cfg) / "models" / (wtag(w) + ".cfnn");
}
fs::path predict_dir(const PipelineConfig& cfg, int w, std::int64_t t) {
  return work_root(cfg) / "predict" / wtag(w) / tag(t);
}
fs::path stitched_path(const PipelineConfig& cfg, int w, std::int64_t t) {
  return work_root(cfg) / "stitch" / wtag(w) / ("confidence_" + tag(t) + ".cfdr");
}
fs::path mask_path(const PipelineConfig& cfg, std::int64_t t) {
  return cfg.paths.output_dir / ("mask_" + tag(t) + ".pgm");
}
fs::path confidence_path(const PipelineConfig& cfg, std::int64_t t) {
  return cfg.paths.output_dir / ("confidence_" + tag(t) + ".cfdr");
}

std::vector<FrameInfo> load_index(const PipelineConfig& cfg) {
  auto j = read_json(mosaic_dir(cfg) / "index.json", "mosaic");
  std::vector<FrameInfo> frames;
  for (const auto& f : j.at("frames")) {
    frames.push_back({f.at("timestep").get<std::int64_t>(), f.at("truth").get<bool>(),
                      f.at("holdout").get<bool>()});
  }
  return frames;
}

std::vector<FrameInfo> training_frames(const PipelineConfig& cfg) {
  std::vector<FrameInfo> out;
  for (const auto& f : load_index(cfg)) {
    if (f.holdout) continue;
    if (!f.has_truth) {
      throw DataError("training strip " + tag(f.timestep) +
                      " has no cloud mask in the input manifest");
    }
    out.push_back(f);
  }
  return out;
}

json versions() {
  return {{"demcloud", kToolVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"openssl", OPENSSL_VERSION_TEXT},
          {"formats", {{"cfdr", 1}, {"cfts", 1}, {"cfnn", 1}}}};
}

// Each stage records what ran, under which settings.
void stage_manifest(const PipelineConfig& cfg, const std::string& stage) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash(cfg);
  j["versions"] = versions();
  j["settings"] = json::parse(canonical_settings(cfg));
  fs::create_directories(work_root(cfg) / "runs");
  write_json(work_root(cfg) / "runs" / (stage + ".json"), j);
}

std::string file_sha256(const fs::path& p) {
  auto bytes = read_file_bytes(p);
  return sha256_hex(std::string(bytes.begin(), bytes.end()));
}

// Output-directory manifest: config hash, versions and a digest of every
// emitted file. Relative names only, so identical runs write identical bytes.
void output_manifest(const PipelineConfig& cfg) {
  json j;
  j["config_hash"] = config_hash(cfg);
  j["versions"] = versions();
  j["settings"] = json::parse(canonical_settings(cfg));
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(cfg.paths.output_dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name != "run_manifest.json") names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  json files = json::object();
  for (const auto& n : names) files[n] = file_sha256(cfg.paths.output_dir / n);
  j["outputs"] = files;
  write_json(cfg.paths.output_dir / "run_manifest.json", j);
}

struct TextureStats {
  double min = 0.0;
  double max = 1.0;
  ChannelStats channels;
};

json stats_json(const TextureStats& s) {
  return {{"quantize_min", s.min},
          {"quantize_max", s.max},
          {"channel_names", channel_names()},
          {"channel_min", s.channels.min},
          {"channel_max", s.channels.max}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "-"; }

std::string report_row(const std::string& scope, const ConfusionMatrix& cm,
                       const std::optional<double>& ap) {
  const auto io = iou(cm);
  const auto pr = pr_stats(cm);
  return scope + "\t" + std::to_string(cm.tp) + "\t" + std::to_string(cm.fp) + "\t" +
         std::to_string(cm.fn) + "\t" + std::to_string(cm.tn) + "\t" + fmt(io.cloud) + "\t" +
         fmt(io.clear) + "\t" + fmt(io.mean) + "\t" + fmt(pr.precision) + "\t" +
         fmt(pr.recall) + "\t" + fmt(pr.accuracy) + "\t" + fmt(ap) + "\n";
}

}  // namespace

fs::path work_root(const PipelineConfig& cfg) {
  return cfg.paths.work_dir / config_hash(cfg).substr(0, 16);
}

void stage_synth(const PipelineConfig& cfg, const RunOptions& opt) {
  if (!cfg.synth) throw ConfigError("config: `synth` section is required for the synth stage");
  say(opt, "synth: generating " + std::to_string(cfg.synth->strip_count) + " strips");
  const auto data = gen_dataset(*cfg.synth);
  write_dataset(data, *cfg.synth, cfg.paths.input_manifest.parent_path(),
                cfg.paths.input_manifest.filename().string());
  stage_manifest(cfg, "synth");
}

void stage_mosaic(const PipelineConfig& cfg, const RunOptions& opt) {
  require_input(cfg.paths.input_manifest, "synth");
  const auto entries = read_strip_manifest(cfg.paths.input_manifest);
  const auto seq = load_strips(entries);
  if (seq.size() <= static_cast<std::size_t>(cfg.holdout_strips)) {
    throw DataError("input manifest lists " + std::to_string(seq.size()) +
                    " strips; at least holdout_strips + 1 = " +
                    std::to_string(cfg.holdout_strips + 1) + " are needed");
  }
  say(opt, "mosaic: " + std::to_string(seq.size()) + " strips");
  const auto mosaics = accumulate(seq);
  const auto dir = mosaic_dir(cfg);
  fs::create_directories(dir);
  json frames = json::array();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto t = seq[i].timestep;
    const DemGrid prev = i == 0 ? DemGrid(seq[i].grid.width(), seq[i].grid.height(),
                                          seq[i].grid.nodata())
                                : mosaics[i - 1];
    const auto motion = motion_mask(prev, seq[i].grid);
    write_dem(seq[i].grid, strip_path(cfg, t));
    write_dem(mosaics[i], dir / ("mosaic_" + tag(t) + ".cfdr"));
    write_mask(motion, motion_path(cfg, t));
    bool truth = false;
    if (entries[i].mask) {
      const auto overdrawn = read_mask(*entries[i].mask);
      write_mask(clip_mask(overdrawn, motion), truth_path(cfg, t));
      truth = true;
    }
    const bool holdout = i + cfg.holdout_strips >= seq.size();
    frames.push_back({{"timestep", t}, {"truth", truth}, {"holdout", holdout}});
  }
  write_json(dir / "index.json", {{"frames", frames}});
  stage_manifest(cfg, "mosaic");
}

void stage_patch(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  for (const auto& f : frames) {
    require_input(strip_path(cfg, f.timestep), "mosaic");
    say(opt, "patch: strip " + tag(f.timestep));
    save_patch_set(split(read_dem(strip_path(cfg, f.timestep)), cfg.patch),
                   patch_dir(cfg, f.timestep, "dem"));
    save_patch_set(split(read_mask(motion_path(cfg, f.timestep)), cfg.patch),
                   patch_dir(cfg, f.timestep, "motion"));
    if (f.has_truth) {
      save_patch_set(split(read_mask(truth_path(cfg, f.timestep)), cfg.patch),
                     patch_dir(cfg, f.timestep, "truth"));
    }
  }
  stage_manifest(cfg, "patch");
}

void stage_texture(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  const auto train_frames = training_frames(cfg);

  // Quantization bounds over every valid training-strip elevation.
  TextureStats base;
  base.min = std::numeric_limits<double>::infinity();
  base.max = -std::numeric_limits<double>::infinity();
  for (const auto& f : train_frames) {
    require_input(strip_path(cfg, f.timestep), "mosaic");
    const auto strip = read_dem(strip_path(cfg, f.timestep));
    for (float v : strip.values()) {
      if (strip.is_nodata(v)) continue;
      base.min = std::min(base.min, static_cast<double>(v));
      base.max = std::max(base.max, static_cast<double>(v));
    }
  }
  if (!(base.max > base.min)) {
    throw DataError("training strips carry no elevation range to quantize");
  }

  std::vector<PatchSet<DemGrid>> sets;
  for (const auto& f : frames) {
    sets.push_back(load_patch_set<DemGrid>(patch_dir(cfg, f.timestep, "dem")));
  }

  for (int w : cfg.texture.windows) {
    const auto params = cfg.texture.glcm(w, base.min, base.max);
    TextureStats stats = base;
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].holdout) continue;
      const auto& patches = sets[k].patches;
      std::vector<ChannelStats> part(patches.size());
      parallel_for(patches.size(), [&](std::size_t i) {
        part[i].update(texture_features(patches[i].grid, params));
      });
      for (const auto& p : part) stats.channels.merge(p);
    }
    say(opt, "texture: window " + std::to_string(w) + " stats ready");
    const auto dir = texture_dir(cfg, w);
    fs::create_directories(dir);
    write_json(dir / "stats.json", stats_json(stats));
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const auto out = dir / tag(frames[k].timestep);
      fs::create_directories(out);
      const auto& patches = sets[k].patches;
      parallel_for(patches.size(), [&](std::size_t i) {
        const auto& p = patches[i];
        write_texture_stack(texture_stack(p.grid, params, stats.channels),
                            out / patch_file_name(p.ox, p.oy, "cfts"));
      });
    }
  }
  stage_manifest(cfg, "texture");
}

void stage_train(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto train_frames = training_frames(cfg);
  fs::create_directories(work_root(cfg) / "models");
  for (int w : cfg.texture.windows) {
    std::vector<nn::Sample> dataset;
    for (const auto& f : train_frames) {
      const auto truth = load_patch_set<MaskGrid>(patch_dir(cfg, f.timestep, "truth"));
      const auto dir = texture_dir(cfg, w) / tag(f.timestep);
      for (const auto& p : truth.patches) {
        if (cfg.cloudy_only && p.grid.popcount() == 0) continue;
        const auto file = dir / patch_file_name(p.ox, p.oy, "cfts");
        require_input(file, "texture");
        dataset.push_back({read_texture_stack(file), p.grid});
      }
    }
    if (dataset.empty()) throw DataError("no training patches contain cloud");
    say(opt, "train: window " + std::to_string(w) + ", " + std::to_string(dataset.size()) +
                 " patches");
    auto result = nn::train(dataset, cfg.train, cfg.unet, [&](const nn::EpochMetrics& m) {
      say(opt, "train: window " + std::to_string(w) + " epoch " + std::to_string(m.epoch) +
                   " loss " + fmt(m.train_loss) + " val mIoU " + fmt(m.val_miou));
    });
    nn::save_checkpoint(model_path(cfg, w), cfg.unet, result.params);
    const auto base = work_root(cfg) / "models" / wtag(w);
    write_text_file(base.string() + "_metrics.tsv", nn::format_metrics_log(result.log));
    write_json(base.string() + "_split.json",
               {{"patches", dataset.size()},
                {"train", result.split.train},
                {"validation", result.split.validation},
                {"test", result.split.test},
                {"best_epoch", result.best_epoch}});
  }
  stage_manifest(cfg, "train");
}

void stage_predict(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  for (int w : cfg.texture.windows) {
    require_input(model_path(cfg, w), "train");
    const auto ckpt = nn::load_checkpoint(model_path(cfg, w));
    if (ckpt.config.encoder != cfg.unet.encoder || ckpt.config.decoder != cfg.unet.decoder ||
        ckpt.config.bottleneck != cfg.unet.bottleneck) {
      throw DataError(model_path(cfg, w).string() + ": network shape differs from config");
    }
    for (const auto& f : frames) {
      say(opt, "predict: window " + std::to_string(w) + " strip " + tag(f.timestep));
      const auto dems = load_patch_set<DemGrid>(patch_dir(cfg, f.timestep, "dem"));
      PatchSet<ConfidenceGrid> out{dems.parent_width, dems.parent_height, dems.spec, {}};
      out.patches.resize(dems.patches.size());
      const auto dir = texture_dir(cfg, w) / tag(f.timestep);
      parallel_for(dems.patches.size(), [&](std::size_t i) {
        const auto& p = dems.patches[i];
        const auto file = dir / patch_file_name(p.ox, p.oy, "cfts");
        require_input(file, "texture");
        out.patches[i] = {p.ox, p.oy, nn::predict(ckpt.config, ckpt.params, read_texture_stack(file))};
      });
      save_patch_set(out, predict_dir(cfg, w, f.timestep));
    }
  }
  stage_manifest(cfg, "predict");
}

void stage_stitch(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  for (int w : cfg.texture.windows) {
    fs::create_directories(stitched_path(cfg, w, 0).parent_path());
    for (const auto& f : frames) {
      require_input(predict_dir(cfg, w, f.timestep), "predict");
      say(opt, "stitch: window " + std::to_string(w) + " strip " + tag(f.timestep));
      write_confidence(stitch(load_patch_set<ConfidenceGrid>(predict_dir(cfg, w, f.timestep))),
                       stitched_path(cfg, w, f.timestep));
    }
  }
  stage_manifest(cfg, "stitch");
}

void stage_ensemble(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  fs::create_directories(cfg.paths.output_dir);
  StripSequence cleaned;
  for (const auto& f : frames) {
    std::vector<ConfidenceGrid> members;
    for (int w : cfg.texture.windows) {
      require_input(stitched_path(cfg, w, f.timestep), "stitch");
      members.push_back(read_confidence(stitched_path(cfg, w, f.timestep)));
    }
    say(opt, "ensemble: strip " + tag(f.timestep));
    const auto conf = combine(members);
    const auto mask = dilate(threshold(conf, cfg.ensemble.threshold), cfg.ensemble.kernel_width,
                             cfg.ensemble.kernel_height);
    write_confidence(conf, confidence_path(cfg, f.timestep));
    write_mask(mask, mask_path(cfg, f.timestep));
    cleaned.push_back({f.timestep, apply_mask(read_dem(strip_path(cfg, f.timestep)), mask)});
  }
  const auto mosaics = accumulate(cleaned);
  write_dem(mosaics.back(), cfg.paths.output_dir / "cleaned_mosaic.cfdr");
  write_gray(hillshade(mosaics.back(), cfg.hillshade),
             cfg.paths.output_dir / "cleaned_mosaic_hillshade.pgm");
  stage_manifest(cfg, "ensemble");
  output_manifest(cfg);
}

EvaluationSummary stage_evaluate(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  EvaluationSummary s;
  std::vector<std::optional<double>> holdout_ap, all_ap;
  for (const auto& f : frames) {
    if (!f.has_truth) continue;
    require_input(mask_path(cfg, f.timestep), "ensemble");
    const auto pred = read_mask(mask_path(cfg, f.timestep));
    const auto conf = read_confidence(confidence_path(cfg, f.timestep));
    const auto truth = read_mask(truth_path(cfg, f.timestep));
    const auto valid = read_mask(motion_path(cfg, f.timestep));
    FrameEvaluation e{f.timestep, f.holdout, confusion(pred, truth, &valid),
                      average_precision(conf, truth, &valid)};
    s.all += e.cm;
    all_ap.push_back(e.ap);
    if (f.holdout) {
      s.holdout += e.cm;
      holdout_ap.push_back(e.ap);
    }
    s.frames.push_back(e);
  }
  if (s.frames.empty()) throw DataError("no strip carries a truth mask to evaluate against");
  s.holdout_map = mean_average_precision(holdout_ap);
  s.all_map = mean_average_precision(all_ap);

  fs::create_directories(cfg.paths.output_dir);
  std::string report = evaluation_report(s.frames);
  report += report_row("holdout", s.holdout, s.holdout_map);
  report += report_row("all", s.all, s.all_map);
  write_text_file(cfg.paths.output_dir / "report.tsv", report);
  write_text_file(cfg.paths.output_dir / "confusion.txt",
                  "held-out strips\n" + render_confusion(s.holdout) + "\nall strips\n" +
                      render_confusion(s.all));
  const auto pr = pr_stats(s.holdout);
  say(opt, "evaluate: held-out recall " + fmt(pr.recall) + " precision " + fmt(pr.precision));
  stage_manifest(cfg, "evaluate");
  output_manifest(cfg);
  return s;
}

std::string evaluation_report(const std::vector<FrameEvaluation>& frames) {
  std::string out =
      "scope\ttp\tfp\tfn\ttn\tiou_cloud\tiou_clear\tmiou\tprecision\trecall\taccuracy\tap\n";
  for (const auto& f : frames) {
    out += report_row(std::string(f.holdout ? "holdout:" : "train:") + tag(f.timestep), f.cm, f.ap);
  }
  return out;
}

void stage_hillshade(const PipelineConfig& cfg, const RunOptions& opt) {
  const auto frames = load_index(cfg);
  fs::create_directories(cfg.paths.output_dir);
  for (const auto& f : frames) {
    const auto src = mosaic_dir(cfg) / ("mosaic_" + tag(f.timestep) + ".cfdr");
    require_input(src, "mosaic");
    say(opt, "hillshade: mosaic " + tag(f.timestep));
    write_gray(hillshade(read_dem(src), cfg.hillshade),
               cfg.paths.output_dir / ("hillshade_" + tag(f.timestep) + ".pgm"));
  }
  stage_manifest(cfg, "hillshade");
}

EvaluationSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opt) {
  validate_config(cfg, true);
  if (cfg.synth) stage_synth(cfg, opt);
  stage_mosaic(cfg, opt);
  stage_patch(cfg, opt);
  stage_texture(cfg, opt);
  stage_train(cfg, opt);
  stage_predict(cfg, opt);
  stage_stitch(cfg, opt);
  stage_ensemble(cfg, opt);
  auto summary = stage_evaluate(cfg, opt);
  stage_manifest(cfg, "pipeline");
  return summary;
}

}  // namespace demcloud
