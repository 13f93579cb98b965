#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"

namespace gsocc {

enum class ShapeKind { box, sphere, plane };

// Labeled primitive. box: center, half_extents, yaw about +z (radians).
// sphere: center, radius. plane: slab of half-thickness `thickness` around
// the plane through `center` with normal `normal`.
struct Shape {
  ShapeKind kind = ShapeKind::box;
  std::uint8_t label = 1;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  double yaw = 0.0;
  double radius = 1.0;
  Vec3 normal = Vec3::UnitZ();
  double thickness = 0.5;

  bool contains(const Vec3& p) const;
};

// Labels every voxel whose center lies inside a shape; later shapes
// overwrite earlier ones. Everything else is class 0.
OccupancyGrid rasterize_shapes(const GridSpec& spec, std::size_t class_count,
                               std::span<const Shape> shapes);

struct SyntheticOptions {
  bool emit_scene = false;
  // Isotropic scale of emitted Gaussians as a fraction of the smallest cell
  // edge, clamped to [s_min, s_max]. Below 1/6 a 3-sigma neighborhood stays
  // inside the Gaussian's own voxel.
  double scale_fraction = 0.15;
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
};

struct SyntheticResult {
  OccupancyGrid grid;
  // One Gaussian per non-empty voxel at its center with one-hot semantics.
  std::optional<GaussianScene> scene;
};

SyntheticResult gen_synthetic(const GridSpec& spec, std::size_t class_count,
                              std::span<const Shape> shapes, const SyntheticOptions& options = {});

// `count` random shapes inside the volume with labels in [1, class_count).
std::vector<Shape> random_shapes(const GridSpec& spec, std::size_t class_count, std::size_t count,
                                 std::uint64_t seed);

struct RandomSceneOptions {
  std::size_t count = 100;
  std::size_t class_count = 4;
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
  // Fraction of the volume extent added around it when drawing means, so
  // some Gaussians fall outside.
  double margin = 0.0;
  // Standard deviation of the normal logits turned into semantics by softmax.
  double logit_stddev = 1.0;
  std::uint64_t seed = 0;
};

// Means uniform in the (optionally padded) volume, scales uniform in
// [s_min, s_max], uniformly random rotations, softmax-normalized semantics.
GaussianScene random_scene(const GridSpec& spec, const RandomSceneOptions& options);

}  // namespace gsocc
