#include <gtest/gtest.h>

#include "../acceptance/fixtures.hpp"
#include "demcloud/config.hpp"

using namespace demcloud;

namespace {

std::string without_line(const std::string& text, const std::string& needle) {
  const auto at = text.rfind('\n', text.find(needle)) + 1;
  const auto end = text.find('\n', at);
  return text.substr(0, at) + text.substr(end + 1);
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "/tmp");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesFixture) {
  const auto cfg = parse_config(fixtures::pipeline_yaml(7), "/base");
  EXPECT_EQ(cfg.paths.input_manifest, "/base/data/strips.txt");
  EXPECT_EQ(cfg.paths.work_dir, "/base/work");
  EXPECT_EQ(cfg.patch.size, 64u);
  EXPECT_EQ(cfg.texture.windows, (std::vector<int>{3, 5, 15}));
  EXPECT_EQ(cfg.train.epochs, 7);
  EXPECT_EQ(cfg.train.seed, cfg.seed);
  EXPECT_EQ(cfg.ensemble.kernel_width, 5);
  ASSERT_TRUE(cfg.synth.has_value());
  EXPECT_EQ(cfg.synth->seed, cfg.seed);
  EXPECT_EQ(cfg.synth->clouds_max, 5);
}

TEST(Config, MissingThresholdIsNamed) {
  const auto text = without_line(fixtures::pipeline_yaml(1), "threshold:");
  EXPECT_NE(config_error(text).find("ensemble.threshold"), std::string::npos)
      << config_error(text);
}

TEST(Config, FieldLevelMessages) {
  const auto base = fixtures::pipeline_yaml(1);
  EXPECT_NE(config_error(without_line(base, "work_dir:")).find("paths.work_dir"),
            std::string::npos);
  std::string typo = base;
  typo.replace(typo.find("batch_size"), 10, "batchsize");
  EXPECT_NE(config_error(typo).find("train.batch_size"), std::string::npos);
  std::string extra = base;
  extra.insert(extra.find("  cloudy_only"), "  momentum: 0.9\n");
  EXPECT_NE(config_error(extra).find("unknown field `train.momentum`"), std::string::npos);
  std::string wrong = base;
  wrong.replace(wrong.find("levels: 32"), 10, "levels: x");
  EXPECT_NE(config_error(wrong).find("texture.levels"), std::string::npos);
  std::string empty_windows = base;
  empty_windows.replace(empty_windows.find("[3, 5, 15]"), 10, "[]");
  EXPECT_NE(config_error(empty_windows).find("texture.windows"), std::string::npos);
  EXPECT_NE(config_error("seed: [").find("YAML"), std::string::npos);
}

TEST(Config, HashIgnoresPathsButNotSettings) {
  const auto a = parse_config(fixtures::pipeline_yaml(3), "/one");
  const auto b = parse_config(fixtures::pipeline_yaml(3), "/two");
  const auto c = parse_config(fixtures::pipeline_yaml(4), "/one");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 64u);
  auto d = a;
  apply_seed(d, 99);
  EXPECT_NE(config_hash(a), config_hash(d));
  EXPECT_EQ(d.train.seed, 99u);
}

TEST(Config, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, PathCheckRequiresManifestWithoutSynth) {
  std::string text = fixtures::pipeline_yaml(1);
  text = text.substr(0, text.find("synth:"));
  const auto cfg = parse_config(text, "/nonexistent");
  EXPECT_THROW(validate_config(cfg, true), ConfigError);
  EXPECT_NO_THROW(validate_config(cfg, false));
}

TEST(Config, LoadReportsMissingFile) {
  EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
}
