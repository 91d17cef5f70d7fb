#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demcloud/config.hpp"
#include "demcloud/metrics.hpp"

namespace demcloud {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
  bool verbose = false;
};

// Work files live under work_dir/<first 16 hex digits of the config hash>/
// so that stages run with different settings never mix.
std::filesystem::path work_root(const PipelineConfig& cfg);

// Stages in chain order. Each reads the previous stage's files and fails with
// a DataError naming the first missing input.
void stage_synth(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_mosaic(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_patch(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_texture(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_train(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_predict(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_stitch(const PipelineConfig& cfg, const RunOptions& opt = {});
void stage_ensemble(const PipelineConfig& cfg, const RunOptions& opt = {});

struct FrameEvaluation {
  std::int64_t timestep = 0;
  bool holdout = false;
  ConfusionMatrix cm;
  std::optional<double> ap;
};

struct EvaluationSummary {
  std::vector<FrameEvaluation> frames;
  ConfusionMatrix holdout;
  ConfusionMatrix all;
  std::optional<double> holdout_map;
  std::optional<double> all_map;
};

// Scores output masks against clipped truth inside each strip's motion mask
// and writes report.tsv and confusion.txt to the output directory.
EvaluationSummary stage_evaluate(const PipelineConfig& cfg, const RunOptions& opt = {});

// Hillshade previews of every mosaic frame into the output directory.
void stage_hillshade(const PipelineConfig& cfg, const RunOptions& opt = {});

// synth (when configured) through evaluate.
EvaluationSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opt = {});

// Report for a single prediction/truth pair.
std::string evaluation_report(const std::vector<FrameEvaluation>& frames);

}  // namespace demcloud
