#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gsocc/gaussian.hpp"

namespace gsocc {

inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr std::uint8_t kEmptyClass = 0;
// Labels are 8-bit with 255 reserved, so at most 255 classes.
inline constexpr std::size_t kMaxClassCount = 255;

using VoxelCoord = std::array<std::uint32_t, 3>;

// Axis-aligned voxel volume. Voxel (i, j, k) has center
// origin + ((i, j, k) + 0.5) * cell_size and linear index (i * Y + j) * Z + k.
struct GridSpec {
  Eigen::Vector3f origin = Eigen::Vector3f::Zero();
  Eigen::Vector3f cell_size = Eigen::Vector3f::Ones();
  std::array<std::uint32_t, 3> dims{1, 1, 1};

  // [-50, 50] x [-50, 50] x [-5, 3] m at 200 x 200 x 16.
  static GridSpec nuscenes();
  // 51.2 x 51.2 x 6.4 m in front of the vehicle at 256 x 256 x 32.
  static GridSpec kitti360();
  // dims voxels of size cell, with the volume's minimum corner at origin.
  static GridSpec cube(std::uint32_t n, float cell = 1.0f,
                       Eigen::Vector3f origin = Eigen::Vector3f::Zero());

  // Throws InvalidArgumentError for zero dims or non-positive cells and
  // CapacityError when X*Y*Z does not fit a 32-bit voxel index.
  void validate() const;

  std::uint64_t voxel_count() const {
    return std::uint64_t{dims[0]} * dims[1] * dims[2];
  }

  std::uint32_t linear_index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return (i * dims[1] + j) * dims[2] + k;
  }

  VoxelCoord coord(std::uint32_t v) const {
    const std::uint32_t k = v % dims[2];
    const std::uint32_t ij = v / dims[2];
    return {ij / dims[1], ij % dims[1], k};
  }

  double center_axis(int axis, std::uint32_t idx) const {
    return static_cast<double>(origin[axis]) +
           (static_cast<double>(idx) + 0.5) * static_cast<double>(cell_size[axis]);
  }

  Vec3 center(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return {center_axis(0, i), center_axis(1, j), center_axis(2, k)};
  }

  Vec3 center(std::uint32_t v) const {
    const VoxelCoord c = coord(v);
    return center(c[0], c[1], c[2]);
  }

  Vec3 min_corner() const { return origin.cast<double>(); }
  Vec3 max_corner() const;

  // Voxel containing p under half-open cells, or nullopt outside the volume.
  std::optional<VoxelCoord> locate(const Vec3& p) const;

  bool operator==(const GridSpec& o) const {
    return origin == o.origin && cell_size == o.cell_size && dims == o.dims;
  }
};

// Dense per-voxel labels with optional per-voxel class scores
// (voxel-major, class_count floats per voxel).
struct OccupancyGrid {
  GridSpec spec;
  std::size_t class_count = 1;
  std::vector<std::uint8_t> labels;
  std::vector<float> scores;

  OccupancyGrid() = default;
  OccupancyGrid(const GridSpec& s, std::size_t classes, bool with_scores = false);

  bool has_scores() const noexcept { return !scores.empty(); }
  std::size_t voxel_count() const noexcept { return labels.size(); }

  std::span<const float> scores_at(std::size_t v) const {
    return {scores.data() + v * class_count, class_count};
  }
  std::span<float> scores_at(std::size_t v) {
    return {scores.data() + v * class_count, class_count};
  }

  // Throws ShapeError when buffers disagree with spec/class_count and
  // InvalidArgumentError for labels >= class_count other than 255.
  void validate() const;
};

// Index of the largest score; ties go to the lowest index, all-zero -> 0.
std::uint8_t argmax_label(std::span<const float> scores);

// Labels recomputed from scores by argmax. Throws InvalidArgumentError when
// the grid carries no scores.
OccupancyGrid decode_labels(const OccupancyGrid& grid);

}  // namespace gsocc
