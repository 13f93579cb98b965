#include "gsocc/splat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsocc/errors.hpp"
#include "gsocc/parallel.hpp"

namespace gsocc {

namespace {

struct AxisRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  bool empty = true;
};

std::uint32_t clamp_index(double x, std::uint32_t n) {
  if (!(x > 0.0)) return 0;  // also NaN
  if (x >= static_cast<double>(n - 1)) return n - 1;
  return static_cast<std::uint32_t>(x);
}

// Voxels along one axis with |center - m| <= r. Centers are monotone in the
// index, so the qualifying set is one contiguous run; the closed-form estimate
// is corrected against the exact predicate.
AxisRange axis_range(const GridSpec& spec, int axis, double m, double r) {
  const std::uint32_t n = spec.dims[axis];
  auto inside = [&](std::uint32_t i) { return std::abs(spec.center_axis(axis, i) - m) <= r; };
  if (std::isnan(m) || std::isnan(r) || r < 0.0) return {};

  const double o = spec.origin[axis];
  const double cell = spec.cell_size[axis];
  std::uint32_t seed = clamp_index(std::round((m - o) / cell - 0.5), n);
  if (!inside(seed)) {
    if (seed > 0 && inside(seed - 1)) {
      --seed;
    } else if (seed + 1 < n && inside(seed + 1)) {
      ++seed;
    } else {
      return {};
    }
  }

  AxisRange out;
  out.empty = false;
  out.lo = std::min(seed, clamp_index(std::ceil((m - r - o) / cell - 0.5), n));
  out.hi = std::max(seed, clamp_index(std::floor((m + r - o) / cell - 0.5), n));
  while (out.lo > 0 && inside(out.lo - 1)) --out.lo;
  while (!inside(out.lo)) ++out.lo;
  while (out.hi + 1 < n && inside(out.hi + 1)) ++out.hi;
  while (!inside(out.hi)) --out.hi;
  return out;
}

std::vector<VoxelBox> compute_boxes(const GaussianScene& scene, const GridSpec& spec,
                                    double cutoff_sigma, int threads) {
  std::vector<VoxelBox> boxes(scene.size());
  parallel_for(scene.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      boxes[g] = neighborhood_box(spec, scene[g].mean.cast<double>(),
                                  neighborhood_radius(scene[g], cutoff_sigma));
    }
  });
  return boxes;
}

std::vector<PreparedGaussian> prepare(const GaussianScene& scene, int threads) {
  std::vector<PreparedGaussian> prepared(scene.size());
  parallel_for(scene.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) prepared[g] = PreparedGaussian(scene[g]);
  });
  return prepared;
}

void check_scene(const GaussianScene& scene) {
  if (scene.class_count() == 0 || scene.class_count() > kMaxClassCount) {
    throw InvalidArgumentError("scene class count must be in [1, 255]");
  }
  if (scene.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw CapacityError("gaussian count exceeds the 32-bit gaussian index", scene.size());
  }
}

}  // namespace

std::vector<MeanVoxel> voxelize_means(const GaussianScene& scene, const GridSpec& spec) {
  spec.validate();
  std::vector<MeanVoxel> out(scene.size());
  for (std::size_t g = 0; g < scene.size(); ++g) {
    out[g].gaussian = static_cast<std::uint32_t>(g);
    if (const auto c = spec.locate(scene[g].mean.cast<double>())) {
      out[g].voxel = spec.linear_index((*c)[0], (*c)[1], (*c)[2]);
    }
  }
  return out;
}

Vec3 neighborhood_radius(const SemanticGaussian& g, double cutoff_sigma) {
  if (!(cutoff_sigma > 0.0)) {
    throw InvalidArgumentError("cutoff_sigma must be positive");
  }
  const double r = cutoff_sigma * static_cast<double>(g.scale.maxCoeff());
  return Vec3::Constant(r);
}

VoxelBox neighborhood_box(const GridSpec& spec, const Vec3& mean, const Vec3& radius) {
  VoxelBox box;
  for (int a = 0; a < 3; ++a) {
    const AxisRange r = axis_range(spec, a, mean[a], radius[a]);
    if (r.empty) return VoxelBox{};
    box.lo[a] = r.lo;
    box.hi[a] = r.hi;
  }
  box.is_empty = false;
  return box;
}

std::size_t SplatIndex::memory_bytes() const noexcept {
  return by_voxel_.capacity() * sizeof(SplatPair) + by_gaussian_.capacity() * sizeof(SplatPair) +
         voxel_offsets_.capacity() * sizeof(std::uint32_t) +
         gaussian_offsets_.capacity() * sizeof(std::uint32_t);
}

SplatIndex build_splat_index(const GaussianScene& scene, const GridSpec& spec,
                             const SplatOptions& options) {
  spec.validate();
  check_scene(scene);
  const int threads = resolve_thread_count(options.threads);
  const std::size_t num_gaussians = scene.size();
  const std::uint32_t num_voxels = static_cast<std::uint32_t>(spec.voxel_count());
  const std::uint32_t ydim = spec.dims[1];
  const std::uint32_t zdim = spec.dims[2];

  const std::vector<VoxelBox> boxes = compute_boxes(scene, spec, options.cutoff_sigma, threads);

  SplatIndex index;
  index.spec_ = spec;

  // Per-gaussian pair counts k_g and their offsets.
  index.gaussian_offsets_.resize(num_gaussians + 1);
  std::uint64_t total = 0;
  for (std::size_t g = 0; g < num_gaussians; ++g) {
    index.gaussian_offsets_[g] = static_cast<std::uint32_t>(std::min<std::uint64_t>(
        total, std::numeric_limits<std::uint32_t>::max()));
    total += boxes[g].voxel_count();
  }
  if (total > options.max_pairs || total > std::numeric_limits<std::uint32_t>::max()) {
    throw CapacityError("splat pair list overflows its index type", total);
  }
  index.gaussian_offsets_[num_gaussians] = static_cast<std::uint32_t>(total);

  // Pairs in (gaussian, voxel) order, one slot per gaussian.
  index.by_gaussian_.resize(total);
  parallel_for(num_gaussians, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      const VoxelBox& b = boxes[g];
      if (b.empty()) continue;
      SplatPair* out = index.by_gaussian_.data() + index.gaussian_offsets_[g];
      for (std::uint32_t i = b.lo[0]; i <= b.hi[0]; ++i) {
        for (std::uint32_t j = b.lo[1]; j <= b.hi[1]; ++j) {
          const std::uint32_t row = (i * ydim + j) * zdim;
          for (std::uint32_t k = b.lo[2]; k <= b.hi[2]; ++k) {
            *out++ = {static_cast<std::uint32_t>(g), row + k};
          }
        }
      }
    }
  });

  // Counting sort by voxel. Workers own disjoint x-slabs of the key space and
  // visit gaussians in ascending order, so each voxel's run is sorted by
  // gaussian without a comparison sort.
  std::vector<std::uint32_t> counts(num_voxels, 0);
  auto for_each_in_slab = [&](std::size_t i_begin, std::size_t i_end, auto&& visit) {
    for (std::size_t g = 0; g < num_gaussians; ++g) {
      const VoxelBox& b = boxes[g];
      if (b.empty() || b.hi[0] < i_begin || b.lo[0] >= i_end) continue;
      const std::uint32_t i0 = std::max<std::uint32_t>(b.lo[0], static_cast<std::uint32_t>(i_begin));
      const std::uint32_t i1 = std::min<std::uint32_t>(b.hi[0], static_cast<std::uint32_t>(i_end - 1));
      for (std::uint32_t i = i0; i <= i1; ++i) {
        for (std::uint32_t j = b.lo[1]; j <= b.hi[1]; ++j) {
          const std::uint32_t row = (i * ydim + j) * zdim;
          for (std::uint32_t k = b.lo[2]; k <= b.hi[2]; ++k) {
            visit(static_cast<std::uint32_t>(g), row + k);
          }
        }
      }
    }
  };

  parallel_for(spec.dims[0], threads, [&](std::size_t begin, std::size_t end) {
    for_each_in_slab(begin, end, [&](std::uint32_t, std::uint32_t v) { ++counts[v]; });
  });

  index.voxel_offsets_.resize(static_cast<std::size_t>(num_voxels) + 1);
  std::uint32_t running = 0;
  for (std::uint32_t v = 0; v < num_voxels; ++v) {
    index.voxel_offsets_[v] = running;
    running += counts[v];
  }
  index.voxel_offsets_[num_voxels] = running;

  index.by_voxel_.resize(total);
  parallel_for(spec.dims[0], threads, [&](std::size_t begin, std::size_t end) {
    // Reuse counts[] of this slab as write cursors.
    const std::size_t v0 = begin * ydim * zdim;
    const std::size_t v1 = end * ydim * zdim;
    for (std::size_t v = v0; v < v1; ++v) counts[v] = index.voxel_offsets_[v];
    for_each_in_slab(begin, end, [&](std::uint32_t g, std::uint32_t v) {
      index.by_voxel_[counts[v]++] = {g, v};
    });
  });

  return index;
}

OccupancyGrid splat(const GaussianScene& scene, const SplatIndex& index, int threads) {
  check_scene(scene);
  if (index.gaussian_count() != scene.size()) {
    throw ShapeError("splat index was built for " + std::to_string(index.gaussian_count()) +
                     " gaussians, scene has " + std::to_string(scene.size()));
  }
  threads = resolve_thread_count(threads);
  const GridSpec& spec = index.spec();
  const std::size_t classes = scene.class_count();
  const std::vector<PreparedGaussian> prepared = prepare(scene, threads);

  OccupancyGrid grid(spec, classes, true);
  parallel_for(grid.voxel_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const auto run = index.voxel_range(static_cast<std::uint32_t>(v));
      if (run.empty()) continue;
      const Vec3 center = spec.center(static_cast<std::uint32_t>(v));
      float* out = grid.scores.data() + v * classes;
      for (const SplatPair& p : run) {
        const PreparedGaussian& pg = prepared[p.gaussian];
        accumulate_contribution(pg.weight(center), pg.semantics(), out);
      }
      grid.labels[v] = argmax_label({out, classes});
    }
  });
  return grid;
}

OccupancyGrid splat(const GaussianScene& scene, const GridSpec& spec, const SplatOptions& options,
                    SplatStats* stats) {
  const int threads = resolve_thread_count(options.threads);
  SplatOptions opts = options;
  opts.threads = threads;
  const SplatIndex index = build_splat_index(scene, spec, opts);
  OccupancyGrid grid = splat(scene, index, threads);
  if (stats != nullptr) {
    stats->pair_count = index.pair_count();
    stats->peak_bytes = index.memory_bytes() + scene.size() * sizeof(PreparedGaussian) +
                        grid.labels.capacity() + grid.scores.capacity() * sizeof(float);
  }
  return grid;
}

OccupancyGrid splat_oracle(const GaussianScene& scene, const GridSpec& spec) {
  spec.validate();
  check_scene(scene);
  const std::size_t classes = scene.class_count();
  std::vector<PreparedGaussian> prepared;
  prepared.reserve(scene.size());
  for (const SemanticGaussian& g : scene) prepared.emplace_back(g);

  OccupancyGrid grid(spec, classes, true);
  for (std::uint32_t i = 0; i < spec.dims[0]; ++i) {
    for (std::uint32_t j = 0; j < spec.dims[1]; ++j) {
      for (std::uint32_t k = 0; k < spec.dims[2]; ++k) {
        const std::uint32_t v = spec.linear_index(i, j, k);
        const Vec3 center = spec.center(i, j, k);
        float* out = grid.scores.data() + static_cast<std::size_t>(v) * classes;
        for (const PreparedGaussian& pg : prepared) {
          accumulate_contribution(pg.weight(center), pg.semantics(), out);
        }
        grid.labels[v] = argmax_label({out, classes});
      }
    }
  }
  return grid;
}

}  // namespace gsocc
