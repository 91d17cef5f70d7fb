#include <gtest/gtest.h>

#include <random>

#include "demcloud/ensemble.hpp"

using namespace demcloud;

TEST(Ensemble, CombineIsPixelwiseProduct) {
  ConfidenceGrid a(2, 1, std::vector<float>{0.5f, 1.0f});
  ConfidenceGrid b(2, 1, std::vector<float>{0.5f, 0.0f});
  ConfidenceGrid c(2, 1, std::vector<float>{0.5f, 0.7f});
  const auto p = combine(a, b, c);
  EXPECT_EQ(p[0], 0.125f);
  EXPECT_EQ(p[1], 0.0f);
  EXPECT_THROW(combine(a, b, ConfidenceGrid(1, 2)), DataError);
  EXPECT_THROW(combine(std::span<const ConfidenceGrid>{}), DataError);
}

TEST(Ensemble, ThresholdIsInclusive) {
  ConfidenceGrid c(3, 1, std::vector<float>{0.1f, 0.09999f, 0.5f});
  const auto m = threshold(c, static_cast<double>(0.1f));
  EXPECT_EQ(m[0], 1);
  EXPECT_EQ(m[1], 0);
  EXPECT_EQ(m[2], 1);
}

TEST(Ensemble, DilateSinglePixelAndBorder) {
  MaskGrid m(9, 9, 0);
  m(4, 4) = 1;
  auto d = dilate(m, 5, 5);
  EXPECT_EQ(d.popcount(), 25u);
  EXPECT_EQ(d(2, 2), 1);
  EXPECT_EQ(d(1, 4), 0);
  MaskGrid corner(9, 9, 0);
  corner(0, 0) = 1;
  d = dilate(corner, 5, 5);
  EXPECT_EQ(d.popcount(), 9u);
  d = dilate(corner, 3, 1);
  EXPECT_EQ(d.popcount(), 2u);
  EXPECT_THROW(dilate(m, 4, 5), ConfigError);
}

TEST(Ensemble, MaskPipeline) {
  std::vector<ConfidenceGrid> members(3, ConfidenceGrid(7, 7, 0.5f));
  members[1](3, 3) = 0.9f;
  EnsembleConfig cfg;
  cfg.threshold = 0.2;  // only the center product 0.225 clears it
  const auto m = ensemble_mask(members, cfg);
  EXPECT_EQ(m.popcount(), 25u);
  cfg.threshold = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
