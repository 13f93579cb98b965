#include "gsocc/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gsocc/errors.hpp"

namespace gsocc {

GridSpec GridSpec::nuscenes() {
  GridSpec s;
  s.origin = {-50.0f, -50.0f, -5.0f};
  s.cell_size = {0.5f, 0.5f, 0.5f};
  s.dims = {200, 200, 16};
  return s;
}

GridSpec GridSpec::kitti360() {
  GridSpec s;
  s.origin = {0.0f, -25.6f, -2.0f};
  s.cell_size = {0.2f, 0.2f, 0.2f};
  s.dims = {256, 256, 32};
  return s;
}

GridSpec GridSpec::cube(std::uint32_t n, float cell, Eigen::Vector3f origin) {
  GridSpec s;
  s.origin = origin;
  s.cell_size = {cell, cell, cell};
  s.dims = {n, n, n};
  return s;
}

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] == 0) {
      throw InvalidArgumentError("grid dimension " + std::to_string(a) + " is zero");
    }
    if (!(cell_size[a] > 0.0f) || !std::isfinite(cell_size[a])) {
      throw InvalidArgumentError("grid cell size along axis " + std::to_string(a) +
                                 " must be positive and finite");
    }
    if (!std::isfinite(origin[a])) {
      throw InvalidArgumentError("grid origin must be finite");
    }
  }
  // 64-bit product of three 32-bit values cannot overflow past 2^96, but may
  // overflow 64 bits; check pairwise.
  const std::uint64_t xy = std::uint64_t{dims[0]} * dims[1];
  if (xy > std::numeric_limits<std::uint32_t>::max() ||
      xy * dims[2] > std::numeric_limits<std::uint32_t>::max()) {
    const long double n = static_cast<long double>(dims[0]) * dims[1] * dims[2];
    throw CapacityError("voxel count exceeds the 32-bit voxel index",
                        n > static_cast<long double>(std::numeric_limits<std::uint64_t>::max())
                            ? std::numeric_limits<std::uint64_t>::max()
                            : static_cast<std::uint64_t>(n));
  }
}

Vec3 GridSpec::max_corner() const {
  return {center_axis(0, dims[0]) - 0.5 * cell_size[0],
          center_axis(1, dims[1]) - 0.5 * cell_size[1],
          center_axis(2, dims[2]) - 0.5 * cell_size[2]};
}

std::optional<VoxelCoord> GridSpec::locate(const Vec3& p) const {
  VoxelCoord c{};
  for (int a = 0; a < 3; ++a) {
    const double rel = (p[a] - static_cast<double>(origin[a])) / static_cast<double>(cell_size[a]);
    if (!(rel >= 0.0) || !(rel < static_cast<double>(dims[a]))) {
      return std::nullopt;
    }
    c[a] = static_cast<std::uint32_t>(std::floor(rel));
    if (c[a] >= dims[a]) return std::nullopt;
  }
  return c;
}

OccupancyGrid::OccupancyGrid(const GridSpec& s, std::size_t classes, bool with_scores)
    : spec(s), class_count(classes) {
  spec.validate();
  if (classes == 0 || classes > kMaxClassCount) {
    throw InvalidArgumentError("class count must be in [1, 255], got " + std::to_string(classes));
  }
  const std::size_t n = static_cast<std::size_t>(spec.voxel_count());
  labels.assign(n, kEmptyClass);
  if (with_scores) {
    scores.assign(n * classes, 0.0f);
  }
}

void OccupancyGrid::validate() const {
  spec.validate();
  if (labels.size() != spec.voxel_count()) {
    throw ShapeError("label buffer has " + std::to_string(labels.size()) + " entries, expected " +
                     std::to_string(spec.voxel_count()));
  }
  if (!scores.empty() && scores.size() != labels.size() * class_count) {
    throw ShapeError("score buffer size does not match voxel count x class count");
  }
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] != kIgnoreLabel && labels[v] >= class_count) {
      throw InvalidArgumentError("label " + std::to_string(labels[v]) + " at voxel " +
                                 std::to_string(v) + " is not below class count " +
                                 std::to_string(class_count));
    }
  }
}

std::uint8_t argmax_label(std::span<const float> scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<std::uint8_t>(best);
}

OccupancyGrid decode_labels(const OccupancyGrid& grid) {
  if (!grid.has_scores()) {
    throw InvalidArgumentError("decode_labels requires a grid with scores");
  }
  OccupancyGrid out(grid.spec, grid.class_count, false);
  for (std::size_t v = 0; v < out.labels.size(); ++v) {
    out.labels[v] = argmax_label(grid.scores_at(v));
  }
  return out;
}

}  // namespace gsocc
