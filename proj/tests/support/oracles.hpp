#pragma once

// Reference implementations used only by tests. None of these go through the
// optimized library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "gsocc/fit.hpp"
#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"
#include "gsocc/splat.hpp"

namespace gsocc::testing {

inline constexpr double kFdStep = 1e-4;

// Central difference of f at x along coordinate i of a parameter vector.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h = kFdStep) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Every (g, v) whose voxel center is within the axis-aligned neighborhood
// box of Gaussian g, by testing all pairs.
inline std::set<std::pair<std::uint32_t, std::uint32_t>> brute_force_pairs(
    const GaussianScene& scene, const GridSpec& spec, double cutoff_sigma) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t g = 0; g < scene.size(); ++g) {
    const double r = cutoff_sigma * static_cast<double>(scene[g].scale.maxCoeff());
    const Vec3 m = scene[g].mean.cast<double>();
    for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
      const Vec3 c = spec.center(v);
      if (std::abs(c.x() - m.x()) <= r && std::abs(c.y() - m.y()) <= r && std::abs(c.z() - m.z()) <= r) {
        out.emplace(g, v);
      }
    }
  }
  return out;
}

// Per-voxel loop calling evaluate() directly, float32 accumulation in
// ascending Gaussian order.
inline std::vector<float> naive_splat_scores(const GaussianScene& scene, const GridSpec& spec) {
  const std::size_t classes = scene.class_count();
  std::vector<float> scores(spec.voxel_count() * classes, 0.0f);
  for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
    const Vec3 c = spec.center(v);
    for (const SemanticGaussian& g : scene) {
      const std::vector<double> contrib = evaluate(g, c);
      for (std::size_t k = 0; k < classes; ++k) {
        scores[v * classes + k] += static_cast<float>(contrib[k]);
      }
    }
  }
  return scores;
}

// Dense double-precision forward over raw parameters: every Gaussian at every
// voxel, weights from the Mahalanobis distance.
inline std::vector<double> dense_forward(const std::vector<RawGaussianParams>& params,
                                         std::size_t classes, const GridSpec& spec, double s_min,
                                         double s_max) {
  std::vector<double> scores(spec.voxel_count() * classes, 0.0);
  for (const RawGaussianParams& p : params) {
    const ActivatedProperties a = activate(p.raw_scale, p.raw_logits, s_min, s_max);
    const GaussianGeometry geo{p.mean, a.scale, p.rotation};
    for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
      const double w = std::exp(-0.5 * mahalanobis_squared(geo, spec.center(v)));
      for (std::size_t c = 0; c < classes; ++c) scores[v * classes + c] += w * a.semantics[c];
    }
  }
  return scores;
}

// Flattening of raw parameters for finite differences: mean, raw_scale,
// rotation, raw_logits per Gaussian.
inline std::vector<double> flatten(const std::vector<RawGaussianParams>& params) {
  std::vector<double> x;
  for (const RawGaussianParams& p : params) {
    for (int a = 0; a < 3; ++a) x.push_back(p.mean[a]);
    for (int a = 0; a < 3; ++a) x.push_back(p.raw_scale[a]);
    for (int a = 0; a < 4; ++a) x.push_back(p.rotation[a]);
    x.insert(x.end(), p.raw_logits.begin(), p.raw_logits.end());
  }
  return x;
}

inline std::vector<RawGaussianParams> unflatten(const std::vector<double>& x, std::size_t count,
                                                std::size_t classes) {
  std::vector<RawGaussianParams> out(count);
  std::size_t i = 0;
  for (RawGaussianParams& p : out) {
    for (int a = 0; a < 3; ++a) p.mean[a] = x[i++];
    for (int a = 0; a < 3; ++a) p.raw_scale[a] = x[i++];
    for (int a = 0; a < 4; ++a) p.rotation[a] = x[i++];
    p.raw_logits.assign(x.begin() + static_cast<std::ptrdiff_t>(i),
                        x.begin() + static_cast<std::ptrdiff_t>(i + classes));
    i += classes;
  }
  return out;
}

}  // namespace gsocc::testing
