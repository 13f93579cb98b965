#pragma once

// Deterministic problem instances shared by the unit and acceptance suites.

#include <cstdint>
#include <vector>

#include "gsocc/fit.hpp"
#include "gsocc/random.hpp"
#include "gsocc/splat.hpp"

namespace gsocc::testing {

struct RecoveryInstance {
  GridSpec spec;
  std::size_t class_count = 8;
  GaussianScene generating{8};
  GaussianScene initial{8};
  OccupancyGrid truth;
};

// K = 8 Gaussians, one per octant of a 16^3 grid of 0.1 m cells, each with
// its own dominant class (class 0 included, so one octant is free space).
// All share one axis-aligned anisotropic shape, which makes the layout
// mirror-symmetric: the generating means are a stationary point of the
// loss, so the target is recoverable by descent. The target is the
// exact-mode splat of the generating scene; the initial scene perturbs every
// mean by N(0, (0.5 cell)^2) per axis.
inline RecoveryInstance make_recovery_instance(std::uint64_t seed) {
  RecoveryInstance in;
  in.spec = GridSpec::cube(16, 0.1f);
  const Eigen::Vector3f scale(0.2f, 0.25f, 0.3f);
  for (int g = 0; g < 8; ++g) {
    const Vec3 octant((g >> 2) & 1, (g >> 1) & 1, g & 1);
    const Vec3 mean = octant * 0.8 + Vec3::Constant(0.4);
    std::vector<double> raw(in.class_count, 0.0);
    raw[static_cast<std::size_t>(g)] = 2.0;
    const std::vector<double> sem = softmax(raw);
    in.generating.add(make_gaussian(mean.cast<float>(), scale, {1, 0, 0, 0},
                                    std::vector<float>(sem.begin(), sem.end())));
  }
  SplatOptions exact;
  exact.cutoff_sigma = kExactCutoff;
  in.truth = splat(in.generating, in.spec, exact);
  in.truth.scores.clear();

  Rng rng(seed);
  const double noise = 0.5 * 0.1;
  for (const SemanticGaussian& g : in.generating) {
    SemanticGaussian p = g;
    for (int a = 0; a < 3; ++a) p.mean[a] += static_cast<float>(rng.normal(0.0, noise));
    in.initial.add(std::move(p));
  }
  return in;
}

}  // namespace gsocc::testing
