#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "gsocc/errors.hpp"
#include "gsocc/metrics.hpp"
#include "gsocc/random.hpp"

namespace gsocc {
namespace {

OccupancyGrid grid_of(std::vector<std::uint8_t> labels, std::size_t classes) {
  GridSpec spec;
  spec.dims = {static_cast<std::uint32_t>(labels.size()), 1, 1};
  OccupancyGrid g(spec, classes);
  g.labels = std::move(labels);
  return g;
}

OccupancyGrid random_grid(Rng& rng, std::size_t n, std::size_t classes, double ignore_rate) {
  std::vector<std::uint8_t> labels(n);
  for (auto& l : labels) {
    l = rng.uniform() < ignore_rate ? kIgnoreLabel : static_cast<std::uint8_t>(rng.below(classes));
  }
  return grid_of(std::move(labels), classes);
}

TEST(Confusion, PerfectPredictionIsDiagonal) {
  const OccupancyGrid g = grid_of({0, 1, 2, 2, 1, 0, 3}, 4);
  const ConfusionMatrix cm = confusion(g, g);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p) {
      if (t != p) {
        EXPECT_EQ(cm.at(t, p), 0u);
      }
    }
  EXPECT_EQ(cm.at(2, 2), 2u);
  EXPECT_EQ(cm.total(), 7u);
}

TEST(Confusion, AllIgnored) {
  const OccupancyGrid truth = grid_of({255, 255, 255}, 2);
  const OccupancyGrid pred = grid_of({0, 1, 1}, 2);
  const ConfusionMatrix cm = confusion(pred, truth);
  EXPECT_EQ(cm.total(), 0u);
  EXPECT_EQ(cm.ignore_count(), 3u);
  EXPECT_THROW(miou(cm), UndefinedMetricError);
  EXPECT_THROW(scene_completion_iou(cm), UndefinedMetricError);
}

TEST(Confusion, TwoVoxelTally) {
  const ConfusionMatrix cm = confusion(grid_of({1, 1}, 2), grid_of({0, 1}, 2));
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.at(0, 0), 0u);
  EXPECT_EQ(cm.at(1, 0), 0u);
}

TEST(Confusion, ShapeMismatch) {
  EXPECT_THROW(confusion(grid_of({0, 1}, 2), grid_of({0, 1, 1}, 2)), ShapeError);
  EXPECT_THROW(confusion(grid_of({0, 1}, 2), grid_of({0, 1}, 3)), ShapeError);
}

TEST(Confusion, IgnoreLabelInPredictionRejected) {
  EXPECT_THROW(confusion(grid_of({255, 1}, 2), grid_of({0, 1}, 2)), InvalidArgumentError);
}

TEST(Confusion, CountsPlusIgnoredEqualsVoxels) {
  Rng rng(1);
  for (int n = 0; n < 20; ++n) {
    const OccupancyGrid truth = random_grid(rng, 1000, 6, 0.2);
    const OccupancyGrid pred = random_grid(rng, 1000, 6, 0.0);
    const ConfusionMatrix cm = confusion(pred, truth);
    EXPECT_EQ(cm.total() + cm.ignore_count(), 1000u);
  }
}

TEST(Confusion, AdditiveOverPartitions) {
  Rng rng(2);
  const OccupancyGrid truth = random_grid(rng, 997, 5, 0.1);
  const OccupancyGrid pred = random_grid(rng, 997, 5, 0.0);
  const ConfusionMatrix whole = confusion(pred, truth);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint8_t> part_of(997);
    for (auto& p : part_of) p = static_cast<std::uint8_t>(rng.below(3));
    ConfusionMatrix sum(5);
    for (std::uint8_t part = 0; part < 3; ++part) {
      std::vector<std::uint8_t> t, p;
      for (std::size_t v = 0; v < 997; ++v) {
        if (part_of[v] != part) continue;
        t.push_back(truth.labels[v]);
        p.push_back(pred.labels[v]);
      }
      if (t.empty()) continue;
      sum += confusion(grid_of(p, 5), grid_of(t, 5));
    }
    EXPECT_EQ(sum, whole);
  }
}

TEST(Confusion, ShardedEqualsSerial) {
  Rng rng(3);
  const OccupancyGrid truth = random_grid(rng, 10007, 7, 0.1);
  const OccupancyGrid pred = random_grid(rng, 10007, 7, 0.0);
  const ConfusionMatrix serial = confusion(pred, truth, 1);
  for (int threads : {2, 4, 8}) EXPECT_EQ(confusion(pred, truth, threads), serial);
}

TEST(Miou, PerfectPrediction) {
  const OccupancyGrid g = grid_of({0, 1, 2, 3, 3, 2, 1}, 4);
  const IouResult r = miou(confusion(g, g));
  EXPECT_EQ(r.miou, 1.0);
  EXPECT_EQ(r.classes_averaged, 3u);
  EXPECT_EQ(*r.per_class[0], 1.0);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_EQ(*r.per_class[c], 1.0);
}

TEST(Miou, ThreeTruePositivesOneFalsePositiveTwoFalseNegatives) {
  ConfusionMatrix cm(2);
  cm.at(1, 1) = 3;
  cm.at(0, 1) = 1;
  cm.at(1, 0) = 2;
  EXPECT_EQ(cm.true_positives(1), 3u);
  EXPECT_EQ(cm.false_positives(1), 1u);
  EXPECT_EQ(cm.false_negatives(1), 2u);
  const IouResult r = miou(cm);
  EXPECT_EQ(*r.per_class[1], 0.5);
  EXPECT_EQ(r.miou, 0.5);
}

TEST(Miou, SameCaseFromGrids) {
  const OccupancyGrid truth = grid_of({1, 1, 1, 1, 1, 0}, 2);
  const OccupancyGrid pred = grid_of({1, 1, 1, 0, 0, 1}, 2);
  EXPECT_EQ(miou(confusion(pred, truth)).miou, 0.5);
}

TEST(Miou, ClassNeverPredictedCountsAsZero) {
  const OccupancyGrid truth = grid_of({1, 1, 2, 2}, 3);
  const OccupancyGrid pred = grid_of({1, 1, 1, 1}, 3);
  const IouResult r = miou(confusion(pred, truth));
  EXPECT_EQ(*r.per_class[2], 0.0);
  EXPECT_EQ(*r.per_class[1], 0.5);
  EXPECT_EQ(r.classes_averaged, 2u);
  EXPECT_EQ(r.miou, 0.25);
}

TEST(Miou, AbsentClassesExcluded) {
  const OccupancyGrid truth = grid_of({1, 1, 0}, 5);
  const OccupancyGrid pred = grid_of({1, 1, 0}, 5);
  const IouResult r = miou(confusion(pred, truth));
  EXPECT_EQ(r.classes_averaged, 1u);
  EXPECT_FALSE(r.per_class[3].has_value());
}

TEST(Miou, OnlyEmptyClassIsUndefined) {
  const OccupancyGrid g = grid_of({0, 0, 0}, 3);
  EXPECT_THROW(miou(confusion(g, g)), UndefinedMetricError);
}

TEST(Miou, BoundedAndExactMean) {
  Rng rng(4);
  for (int n = 0; n < 30; ++n) {
    const IouResult r = miou(confusion(random_grid(rng, 500, 6, 0.0), random_grid(rng, 500, 6, 0.05)));
    std::vector<double> included;
    for (std::size_t c = 1; c < r.per_class.size(); ++c) {
      if (!r.per_class[c]) continue;
      EXPECT_GE(*r.per_class[c], 0.0);
      EXPECT_LE(*r.per_class[c], 1.0);
      included.push_back(*r.per_class[c]);
    }
    ASSERT_EQ(included.size(), r.classes_averaged);
    std::sort(included.begin(), included.end());
    double sum = 0.0;
    for (double x : included) sum += x;
    EXPECT_EQ(r.miou, sum / static_cast<double>(included.size()));
  }
}

TEST(Miou, PermutationInvariant) {
  Rng rng(5);
  for (int n = 0; n < 20; ++n) {
    const OccupancyGrid truth = random_grid(rng, 800, 6, 0.1);
    const OccupancyGrid pred = random_grid(rng, 800, 6, 0.0);
    std::vector<std::uint8_t> perm{1, 2, 3, 4, 5};
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto relabel = [&](OccupancyGrid g) {
      for (auto& l : g.labels)
        if (l != 0 && l != kIgnoreLabel) l = perm[l - 1];
      return g;
    };
    const ConfusionMatrix a = confusion(pred, truth);
    const ConfusionMatrix b = confusion(relabel(pred), relabel(truth));
    EXPECT_EQ(miou(a).miou, miou(b).miou);
    EXPECT_EQ(scene_completion_iou(a), scene_completion_iou(b));
  }
}

TEST(SceneCompletion, WrongClassStillOccupied) {
  const OccupancyGrid truth = grid_of({1, 2, 0}, 3);
  const OccupancyGrid pred = grid_of({2, 1, 0}, 3);
  EXPECT_EQ(scene_completion_iou(confusion(pred, truth)), 1.0);
}

TEST(SceneCompletion, OneThird) {
  const OccupancyGrid truth = grid_of({1, 1, 0}, 2);
  const OccupancyGrid pred = grid_of({1, 0, 1}, 2);
  EXPECT_EQ(scene_completion_iou(confusion(pred, truth)), 1.0 / 3.0);
}

TEST(SceneCompletion, AllEmptyIsUndefined) {
  const OccupancyGrid g = grid_of({0, 0, 0, 255}, 2);
  EXPECT_THROW(scene_completion_iou(confusion(grid_of({0, 0, 0, 0}, 2), g)), UndefinedMetricError);
}

}  // namespace
}  // namespace gsocc
