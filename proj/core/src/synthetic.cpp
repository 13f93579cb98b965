#include "gsocc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gsocc/errors.hpp"
#include "gsocc/random.hpp"

namespace gsocc {

bool Shape::contains(const Vec3& p) const {
  switch (kind) {
    case ShapeKind::box: {
      const Vec3 d = p - center;
      const double c = std::cos(yaw), s = std::sin(yaw);
      // rotate into the box frame (inverse yaw)
      const double lx = c * d.x() + s * d.y();
      const double ly = -s * d.x() + c * d.y();
      return std::abs(lx) <= half_extents.x() && std::abs(ly) <= half_extents.y() &&
             std::abs(d.z()) <= half_extents.z();
    }
    case ShapeKind::sphere:
      return (p - center).squaredNorm() <= radius * radius;
    case ShapeKind::plane: {
      const double n = normal.norm();
      if (n == 0.0) return false;
      return std::abs((p - center).dot(normal) / n) <= thickness;
    }
  }
  return false;
}

OccupancyGrid rasterize_shapes(const GridSpec& spec, std::size_t class_count,
                               std::span<const Shape> shapes) {
  OccupancyGrid grid(spec, class_count, false);
  for (const Shape& s : shapes) {
    if (s.label >= class_count && s.label != kIgnoreLabel) {
      throw InvalidArgumentError("shape label " + std::to_string(s.label) +
                                 " is not below class count " + std::to_string(class_count));
    }
  }
  for (std::uint32_t v = 0; v < grid.voxel_count(); ++v) {
    const Vec3 c = spec.center(v);
    for (const Shape& s : shapes) {
      if (s.contains(c)) grid.labels[v] = s.label;
    }
  }
  return grid;
}

SyntheticResult gen_synthetic(const GridSpec& spec, std::size_t class_count,
                              std::span<const Shape> shapes, const SyntheticOptions& options) {
  SyntheticResult out{rasterize_shapes(spec, class_count, shapes), std::nullopt};
  if (!options.emit_scene) return out;

  const double cell = static_cast<double>(spec.cell_size.minCoeff());
  const float sigma = static_cast<float>(
      std::clamp(options.scale_fraction * cell, options.s_min, options.s_max));
  GaussianScene scene(class_count);
  for (std::uint32_t v = 0; v < out.grid.voxel_count(); ++v) {
    const std::uint8_t label = out.grid.labels[v];
    if (label == kEmptyClass || label == kIgnoreLabel) continue;
    std::vector<float> sem(class_count, 0.0f);
    sem[label] = 1.0f;
    scene.add(make_gaussian(spec.center(v).cast<float>(), Eigen::Vector3f::Constant(sigma),
                            Eigen::Vector4f(1.0f, 0.0f, 0.0f, 0.0f), std::move(sem)));
  }
  out.scene = std::move(scene);
  return out;
}

std::vector<Shape> random_shapes(const GridSpec& spec, std::size_t class_count, std::size_t count,
                                 std::uint64_t seed) {
  if (class_count < 2) throw InvalidArgumentError("random shapes need a non-empty class");
  Rng rng(seed);
  const Vec3 lo = spec.min_corner();
  const Vec3 hi = spec.max_corner();
  const Vec3 extent = hi - lo;
  std::vector<Shape> shapes;
  shapes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Shape s;
    s.kind = static_cast<ShapeKind>(rng.below(3));
    s.label = static_cast<std::uint8_t>(1 + rng.below(class_count - 1));
    for (int a = 0; a < 3; ++a) s.center[a] = rng.uniform(lo[a], hi[a]);
    for (int a = 0; a < 3; ++a) s.half_extents[a] = rng.uniform(0.05, 0.25) * extent[a];
    s.yaw = rng.uniform(0.0, std::numbers::pi);
    s.radius = rng.uniform(0.05, 0.25) * extent.minCoeff();
    s.normal = Vec3(rng.normal(), rng.normal(), rng.normal() + 3.0);  // mostly ground-like
    s.thickness = rng.uniform(0.5, 1.5) * static_cast<double>(spec.cell_size.maxCoeff());
    shapes.push_back(s);
  }
  return shapes;
}

GaussianScene random_scene(const GridSpec& spec, const RandomSceneOptions& o) {
  if (!(o.s_min > 0.0) || !(o.s_min <= o.s_max)) {
    throw InvalidArgumentError("random_scene requires 0 < s_min <= s_max");
  }
  Rng rng(o.seed);
  const Vec3 lo = spec.min_corner();
  const Vec3 hi = spec.max_corner();
  const Vec3 pad = o.margin * (hi - lo);
  GaussianScene scene(o.class_count);
  scene.reserve(o.count);
  std::vector<double> logits(o.class_count);
  for (std::size_t g = 0; g < o.count; ++g) {
    Eigen::Vector3f mean, scale;
    for (int a = 0; a < 3; ++a) mean[a] = static_cast<float>(rng.uniform(lo[a] - pad[a], hi[a] + pad[a]));
    for (int a = 0; a < 3; ++a) scale[a] = static_cast<float>(rng.uniform(o.s_min, o.s_max));
    Quat q;
    do {
      q = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    } while (q.norm() < 1e-6);
    for (double& l : logits) l = rng.normal(0.0, o.logit_stddev);
    const std::vector<double> sem = softmax(logits);
    scene.add(make_gaussian(mean, scale, q.cast<float>(), std::vector<float>(sem.begin(), sem.end())));
  }
  return scene;
}

}  // namespace gsocc
