#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gsocc/grid.hpp"

namespace gsocc {

// counts[t * C + p] = number of voxels with truth t predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t class_count = 1);

  std::size_t class_count() const noexcept { return classes_; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }

  std::uint64_t ignore_count() const noexcept { return ignored_; }
  void add_ignored(std::uint64_t n = 1) noexcept { ignored_ += n; }

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t false_positives(std::size_t c) const;  // column sum minus TP
  std::uint64_t false_negatives(std::size_t c) const;  // row sum minus TP
  std::uint64_t total() const;                         // excludes ignored voxels

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

// Tallies pred against truth. Truth voxels labeled 255 are counted in
// ignore_count. Throws ShapeError on spec or class-count mismatch and
// InvalidArgumentError when the prediction itself holds an ignore label.
ConfusionMatrix confusion(const OccupancyGrid& pred, const OccupancyGrid& truth, int threads = 1);

struct IouResult {
  std::vector<std::optional<double>> per_class;  // nullopt: TP + FP + FN == 0
  double miou = 0.0;
  std::size_t classes_averaged = 0;
};

// Per-class IoU for every class and the mean over non-empty classes with a
// defined IoU. Throws UndefinedMetricError when no such class exists.
IouResult miou(const ConfusionMatrix& cm, std::size_t empty_class = kEmptyClass);

// IoU of "occupied" (any class other than empty_class) vs empty. Throws
// UndefinedMetricError when neither grid has an occupied voxel.
double scene_completion_iou(const ConfusionMatrix& cm, std::size_t empty_class = kEmptyClass);

}  // namespace gsocc
