#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gsocc/grid.hpp"

namespace gsocc {

struct LossWeights {
  double ce = 1.0;
  double lovasz = 1.0;
};

struct VoxelLoss {
  double loss = 0.0;    // ce_weight * ce + lovasz_weight * lovasz
  double ce = 0.0;      // mean over non-ignore voxels
  double lovasz = 0.0;  // mean over classes present in truth
  std::size_t valid_voxels = 0;
  // d loss / d scores, voxel-major like the scores; zero on ignore voxels.
  std::vector<double> grad;
};

// Cross-entropy and Lovasz-softmax on per-voxel raw scores (softmax applied
// per voxel). scores holds class_count values per voxel. Throws
// UndefinedMetricError when every truth voxel is ignored.
VoxelLoss voxel_losses(std::span<const double> scores, std::size_t class_count,
                       std::span<const std::uint8_t> truth, const LossWeights& weights = {});

// Same, on a float-scored grid. Throws ShapeError on spec mismatch.
VoxelLoss voxel_losses(const OccupancyGrid& pred, const OccupancyGrid& truth,
                       const LossWeights& weights = {});

// Lovasz extension gradient of the Jaccard loss for one class: given
// ground-truth membership sorted by descending error, returns the per-rank
// weights whose dot product with the sorted errors is the loss.
std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_fg);

}  // namespace gsocc
