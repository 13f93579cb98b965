#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"

namespace gsocc {

// Cutoff that makes every neighborhood cover the whole grid ("exact mode").
inline constexpr double kExactCutoff = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultCutoffSigma = 3.0;

struct SplatOptions {
  double cutoff_sigma = kDefaultCutoffSigma;
  int threads = 0;  // 0: resolve_thread_count()
  // Pair offsets are 32-bit; larger pair lists raise CapacityError.
  std::uint64_t max_pairs = std::numeric_limits<std::uint32_t>::max();
};

struct MeanVoxel {
  std::uint32_t gaussian = 0;
  std::optional<std::uint32_t> voxel;  // nullopt: mean outside the volume

  bool in_volume() const noexcept { return voxel.has_value(); }
};

// Voxel containing each Gaussian's mean. Out-of-volume Gaussians are kept
// with an empty voxel.
std::vector<MeanVoxel> voxelize_means(const GaussianScene& scene, const GridSpec& spec);

// cutoff_sigma * max(s) on every axis. The box contains the ellipsoid of
// Mahalanobis radius cutoff_sigma.
Vec3 neighborhood_radius(const SemanticGaussian& g, double cutoff_sigma);

// Inclusive voxel index range [lo, hi] per axis of the voxels whose centers
// satisfy |center[a] - mean[a]| <= radius[a] on every axis. empty() when no
// voxel qualifies.
struct VoxelBox {
  std::array<std::uint32_t, 3> lo{0, 0, 0};
  std::array<std::uint32_t, 3> hi{0, 0, 0};
  bool is_empty = true;

  bool empty() const noexcept { return is_empty; }
  std::uint64_t voxel_count() const noexcept {
    if (is_empty) return 0;
    return std::uint64_t{hi[0] - lo[0] + 1} * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
  }
};

VoxelBox neighborhood_box(const GridSpec& spec, const Vec3& mean, const Vec3& radius);

struct SplatPair {
  std::uint32_t gaussian;
  std::uint32_t voxel;

  bool operator==(const SplatPair&) const = default;
};

// Sorted (gaussian, voxel) pair list. pairs() is ordered by (voxel, gaussian)
// with voxel_range(v) the contiguous run for voxel v; the same pairs are also
// kept in (gaussian, voxel) order for the backward pass.
class SplatIndex {
 public:
  SplatIndex() = default;

  std::span<const SplatPair> pairs() const noexcept { return by_voxel_; }
  std::span<const SplatPair> pairs_by_gaussian() const noexcept { return by_gaussian_; }
  std::span<const std::uint32_t> voxel_offsets() const noexcept { return voxel_offsets_; }

  std::span<const SplatPair> voxel_range(std::uint32_t v) const {
    return std::span<const SplatPair>(by_voxel_).subspan(
        voxel_offsets_[v], voxel_offsets_[v + 1] - voxel_offsets_[v]);
  }
  std::span<const SplatPair> gaussian_range(std::uint32_t g) const {
    return std::span<const SplatPair>(by_gaussian_).subspan(
        gaussian_offsets_[g], gaussian_offsets_[g + 1] - gaussian_offsets_[g]);
  }

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t pair_count() const noexcept { return by_voxel_.size(); }
  std::size_t voxel_count() const noexcept { return voxel_offsets_.empty() ? 0 : voxel_offsets_.size() - 1; }
  std::size_t gaussian_count() const noexcept {
    return gaussian_offsets_.empty() ? 0 : gaussian_offsets_.size() - 1;
  }
  std::size_t memory_bytes() const noexcept;

  friend SplatIndex build_splat_index(const GaussianScene&, const GridSpec&, const SplatOptions&);

 private:
  GridSpec spec_;
  std::vector<SplatPair> by_voxel_;
  std::vector<SplatPair> by_gaussian_;
  std::vector<std::uint32_t> voxel_offsets_;     // voxel_count + 1
  std::vector<std::uint32_t> gaussian_offsets_;  // gaussian_count + 1
};

// Builds the pair list with a counting sort keyed by voxel index. Throws
// CapacityError when the pair count exceeds options.max_pairs.
SplatIndex build_splat_index(const GaussianScene& scene, const GridSpec& spec,
                             const SplatOptions& options = {});

struct SplatStats {
  std::uint64_t pair_count = 0;
  // Bytes held by the index, prepared Gaussians and the output grid at the
  // peak of a splat() call.
  std::uint64_t peak_bytes = 0;
};

// Local aggregation: per voxel, sums contributions of the Gaussians in its
// pair range in ascending Gaussian order, float32 accumulation. Voxels with
// no pairs get zero scores and label 0.
OccupancyGrid splat(const GaussianScene& scene, const GridSpec& spec,
                    const SplatOptions& options = {}, SplatStats* stats = nullptr);

OccupancyGrid splat(const GaussianScene& scene, const SplatIndex& index, int threads = 0);

// O(XYZ * P) reference: every voxel sums all Gaussians in ascending order.
OccupancyGrid splat_oracle(const GaussianScene& scene, const GridSpec& spec);

}  // namespace gsocc
