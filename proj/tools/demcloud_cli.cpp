// demcloud: cloud-artifact detection for DEM strips.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "demcloud/config.hpp"
#include "demcloud/error.hpp"
#include "demcloud/hillshade.hpp"
#include "demcloud/metrics.hpp"
#include "demcloud/parallel.hpp"
#include "demcloud/pipeline.hpp"
#include "demcloud/raster_io.hpp"

namespace {

using namespace demcloud;

struct Globals {
  std::string config;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

PipelineConfig load(const Globals& g, bool check_paths) {
  if (g.config.empty()) throw ConfigError("--config PATH is required for this subcommand");
  auto cfg = load_config(g.config);
  if (g.seed) apply_seed(cfg, *g.seed);
  validate_config(cfg, check_paths);
  return cfg;
}

int run_evaluate_pair(const std::string& pred_path, const std::string& truth_path,
                      const std::string& valid_path, const std::string& conf_path,
                      const std::string& report_path) {
  const auto pred = read_mask(pred_path);
  const auto truth = read_mask(truth_path);
  std::optional<MaskGrid> valid;
  if (!valid_path.empty()) valid = read_mask(valid_path);
  FrameEvaluation e;
  e.cm = confusion(pred, truth, valid ? &*valid : nullptr);
  // Without a confidence map the mask itself serves as a two-level score.
  ConfidenceGrid score(pred.width(), pred.height());
  if (conf_path.empty()) {
    for (std::size_t i = 0; i < pred.size(); ++i) score[i] = pred[i];
  } else {
    score = read_confidence(conf_path);
  }
  e.ap = average_precision(score, truth, valid ? &*valid : nullptr);
  const auto report = evaluation_report({e}) + "\n" + render_confusion(e.cm);
  if (report_path.empty()) {
    std::cout << report;
  } else {
    write_text_file(report_path, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect cloud artifacts in DEM strips with texture features and a U-Net ensemble"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config file (YAML)");
  app.add_option("--threads", g.threads, "Worker cap, 0 = all cores");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_flag("--verbose", g.verbose, "Log progress to stderr");
  app.set_version_flag("--version", kToolVersion);

  std::function<int()> action;
  auto stage = [&](const char* name, const char* help, auto fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&, fn] {
      action = [&, fn] {
        const auto cfg = load(g, false);
        fn(cfg, RunOptions{g.verbose});
        return 0;
      };
    });
    return sub;
  };
  stage("synth", "Generate a synthetic strip dataset", stage_synth);
  stage("mosaic", "Accumulate strips; derive motion and clipped truth masks", stage_mosaic);
  stage("patch", "Split strips and masks into overlapping patches", stage_patch);
  stage("texture", "Compute normalized GLCM texture stacks per window", stage_texture);
  stage("train", "Train one U-Net per texture window", stage_train);
  stage("predict", "Predict cloud confidence per patch", stage_predict);
  stage("stitch", "Stitch patch confidences into frames", stage_stitch);
  stage("ensemble", "Multiply, threshold and dilate into cloud masks", stage_ensemble);

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
  pipeline->callback([&] {
    action = [&] {
      const auto cfg = load(g, true);
      run_pipeline(cfg, RunOptions{g.verbose});
      return 0;
    };
  });

  auto* validate = app.add_subcommand("validate-config", "Check a config file and print its hash");
  validate->callback([&] {
    action = [&] {
      const auto cfg = load(g, true);
      std::cout << "config ok, hash " << config_hash(cfg) << "\n";
      return 0;
    };
  });

  std::string pred, truth, valid, conf, report;
  auto* evaluate = app.add_subcommand("evaluate", "Score masks against truth");
  evaluate->add_option("--pred", pred, "Predicted mask (PGM); pair mode");
  evaluate->add_option("--truth", truth, "Truth mask (PGM); pair mode");
  evaluate->add_option("--valid", valid, "Mask of pixels to evaluate (PGM)");
  evaluate->add_option("--confidence", conf, "Confidence map (CFDR) for AP");
  evaluate->add_option("--report", report, "Write the report here instead of stdout");
  evaluate->callback([&] {
    action = [&] {
      if (!pred.empty() || !truth.empty()) {
        if (pred.empty() || truth.empty()) throw ConfigError("--pred and --truth go together");
        return run_evaluate_pair(pred, truth, valid, conf, report);
      }
      const auto cfg = load(g, false);
      stage_evaluate(cfg, RunOptions{g.verbose});
      return 0;
    };
  });

  std::string hs_in, hs_out;
  HillshadeParams hs;
  auto* shade = app.add_subcommand("hillshade", "Hillshade preview of a DEM or of every mosaic");
  shade->add_option("--in", hs_in, "Input DEM (CFDR)");
  shade->add_option("--out", hs_out, "Output image (PGM)");
  shade->add_option("--azimuth", hs.azimuth_deg, "Light azimuth, degrees");
  shade->add_option("--altitude", hs.altitude_deg, "Light altitude, degrees");
  shade->add_option("--z-factor", hs.z_factor, "Vertical exaggeration");
  shade->callback([&] {
    action = [&] {
      if (!hs_in.empty() || !hs_out.empty()) {
        if (hs_in.empty() || hs_out.empty()) throw ConfigError("--in and --out go together");
        write_gray(hillshade(read_dem(hs_in), hs), hs_out);
        return 0;
      }
      const auto cfg = load(g, false);
      stage_hillshade(cfg, RunOptions{g.verbose});
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    set_thread_cap(g.threads);
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
