#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles/metrics_oracle.hpp"
#include "demcloud/metrics.hpp"

using namespace demcloud;

TEST(Metrics, ConfusionAndIouByHand) {
  MaskGrid pred(4, 1, std::vector<std::uint8_t>{1, 1, 0, 0});
  MaskGrid truth(4, 1, std::vector<std::uint8_t>{1, 0, 1, 0});
  const auto cm = confusion(pred, truth);
  EXPECT_EQ(cm, (ConfusionMatrix{1, 1, 1, 1}));
  const auto io = iou(cm);
  EXPECT_DOUBLE_EQ(io.cloud, 1.0 / 3);
  EXPECT_DOUBLE_EQ(io.clear, 1.0 / 3);
  const auto pr = pr_stats(cm);
  EXPECT_DOUBLE_EQ(*pr.precision, 0.5);
  EXPECT_DOUBLE_EQ(*pr.recall, 0.5);
  EXPECT_DOUBLE_EQ(*pr.accuracy, 0.5);
  MaskGrid valid(4, 1, std::vector<std::uint8_t>{1, 1, 0, 0});
  EXPECT_EQ(confusion(pred, truth, &valid), (ConfusionMatrix{1, 1, 0, 0}));
  EXPECT_THROW(confusion(pred, MaskGrid(3, 1)), DataError);
}

TEST(Metrics, EmptyClassesCountAsPerfect) {
  MaskGrid zero(3, 3, 0);
  const auto cm = confusion(zero, zero);
  EXPECT_EQ(iou(cm).mean, 1.0);
  const auto pr = pr_stats(cm);
  EXPECT_FALSE(pr.precision.has_value());
  EXPECT_FALSE(pr.recall.has_value());
  EXPECT_EQ(*pr.accuracy, 1.0);
  EXPECT_FALSE(average_precision(ConfidenceGrid(3, 3, 0.5f), zero).has_value());
}

TEST(Metrics, ApByHandWithTies) {
  // Scores 0.9 (cloud), 0.5 (cloud), 0.5 (clear), 0.1 (cloud).
  ConfidenceGrid c(4, 1, std::vector<float>{0.9f, 0.5f, 0.5f, 0.1f});
  MaskGrid t(4, 1, std::vector<std::uint8_t>{1, 1, 0, 1});
  // Steps: R 1/3 P 1; R 2/3 P 2/3; R 1 P 3/4.
  const double want = 1.0 / 3 * 1 + 1.0 / 3 * (2.0 / 3) + 1.0 / 3 * 0.75;
  EXPECT_NEAR(*average_precision(c, t), want, 1e-15);
}

TEST(Metrics, PropertiesOnRandomFrames) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 300; ++k) {
    MaskGrid p(9, 7), t(9, 7);
    for (auto& v : p.values()) v = rng() % 2;
    for (auto& v : t.values()) v = rng() % 3 == 0;
    const auto cm = confusion(p, t);
    EXPECT_EQ(cm.total(), 63u);
    const auto swapped = confusion(t, p);
    EXPECT_EQ(swapped.fp, cm.fn);
    EXPECT_EQ(swapped.fn, cm.fp);
    const auto pr = pr_stats(cm);
    if (pr.precision && pr.recall) {
      EXPECT_LE(iou(cm).cloud, std::min(*pr.precision, *pr.recall) + 1e-15);
    }
    // AP is invariant under a strictly increasing transform.
    ConfidenceGrid c(9, 7), c2(9, 7);
    for (std::size_t i = 0; i < c.size(); ++i) {
      c[i] = static_cast<float>(rng() % 20) / 20.0f;
      c2[i] = std::sqrt(c[i]) * 0.5f + 0.25f;
    }
    const auto a1 = average_precision(c, t), a2 = average_precision(c2, t);
    ASSERT_EQ(a1.has_value(), a2.has_value());
    if (a1) EXPECT_DOUBLE_EQ(*a1, *a2);
    if (a1) {
      std::vector<double> cv(c.values().begin(), c.values().end());
      std::vector<int> tv(t.values().begin(), t.values().end()), ok(63, 1);
      EXPECT_NEAR(*a1, *oracle::ap(cv, tv, ok), 1e-12);
    }
  }
}

TEST(Metrics, MeanApSkipsUndefinedFrames) {
  const std::vector<std::optional<double>> frames{0.5, std::nullopt, 1.0};
  EXPECT_DOUBLE_EQ(*mean_average_precision(frames), 0.75);
  const std::vector<std::optional<double>> none{std::nullopt};
  EXPECT_FALSE(mean_average_precision(none).has_value());
}

TEST(Metrics, RenderedBlockListsCounts) {
  const auto text = render_confusion(ConfusionMatrix{5, 6, 7, 8});
  for (const char* s : {"5", "6", "7", "8"}) EXPECT_NE(text.find(s), std::string::npos);
}
