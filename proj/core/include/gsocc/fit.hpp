#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"
#include "gsocc/losses.hpp"
#include "gsocc/splat.hpp"

namespace gsocc {

struct FitConfig {
  int iterations = 500;
  double learning_rate = 0.01;
  double weight_decay = 0.01;  // applied to raw scale and raw logits only
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
  // Exact mode by default; a finite cutoff rebuilds the pair index every
  // iteration since means move.
  double cutoff_sigma = kExactCutoff;
  LossWeights loss_weights{};
  std::uint64_t seed = 0;
  int threads = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Optional linear warmup followed by cosine decay to zero over the run.
  bool cosine_schedule = false;
  int warmup_iterations = 0;

  // Throws InvalidArgumentError when an invariant is violated.
  void validate() const;
};

// Pre-activation parameters of one Gaussian.
struct RawGaussianParams {
  Vec3 mean = Vec3::Zero();
  Vec3 raw_scale = Vec3::Zero();
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  std::vector<double> raw_logits;
};

// Gradient of the loss with the same layout as the parameters.
using RawGaussianGrad = RawGaussianParams;

// Output of one optimizer step in refinement form: the mean is a residual,
// the other properties are full replacement values.
struct RefinementProposal {
  Vec3 mean_residual = Vec3::Zero();
  Vec3 raw_scale = Vec3::Zero();
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  std::vector<double> raw_logits;
};

// Activated double-precision Gaussian used by the fitter's forward pass.
struct ActivatedGaussian {
  GaussianGeometry geometry;
  std::vector<double> semantics;
};

// Inverse of activate(). Scales are clamped into the open interval
// (s_min, s_max). Stored semantics that form a probability vector are mapped
// through log; anything else is taken as raw logits.
RawGaussianParams to_raw(const SemanticGaussian& g, double s_min, double s_max);
ActivatedGaussian activate(const RawGaussianParams& p, double s_min, double s_max);
SemanticGaussian to_semantic(const RawGaussianParams& p, double s_min, double s_max);
GaussianScene to_scene(std::span<const RawGaussianParams> params, std::size_t class_count,
                       double s_min, double s_max);

// Double-precision local aggregation over a pair index: scores[v * C + c].
std::vector<double> forward_scores(std::span<const ActivatedGaussian> gaussians,
                                   std::size_t class_count, const SplatIndex& index,
                                   int threads = 0);

// Chain rule from d loss / d scores to every raw parameter. Each Gaussian
// accumulates over its own pairs in ascending voxel order.
std::vector<RawGaussianGrad> backward_splat(std::span<const RawGaussianParams> params,
                                            const SplatIndex& index,
                                            std::span<const double> d_scores,
                                            std::size_t class_count, double s_min, double s_max,
                                            int threads = 0);

// m <- m + m_hat; scale, rotation and logits replaced by the proposal;
// rotation renormalized.
std::vector<RawGaussianParams> refine_step(std::span<const RawGaussianParams> params,
                                           std::span<const RefinementProposal> proposals);

// Adaptive-moment optimizer with decoupled weight decay, producing
// refinement proposals rather than updating in place.
class AdamW {
 public:
  explicit AdamW(const FitConfig& config);

  std::vector<RefinementProposal> propose(std::span<const RawGaussianParams> params,
                                          std::span<const RawGaussianGrad> grads);

  double learning_rate_at(int step) const;
  int steps_taken() const noexcept { return step_; }

 private:
  FitConfig config_;
  int step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct FitIteration {
  int iteration = 0;
  double loss = 0.0;
  double ce_loss = 0.0;
  double lovasz_loss = 0.0;
  double miou = 0.0;    // NaN when undefined
  double sc_iou = 0.0;  // NaN when undefined
  double milliseconds = 0.0;
};

struct FitReport {
  std::vector<FitIteration> iterations;
  GaussianScene final_scene{1};
};

using FitCallback = std::function<void(const FitIteration&)>;

// Iterates splat -> losses -> backward -> AdamW -> refine_step for
// config.iterations rounds, recording the loss and metrics of the scene
// entering each round. Throws DivergenceError on a non-finite loss.
FitReport fit(const GaussianScene& initial, const OccupancyGrid& truth, const FitConfig& config,
              const FitCallback& on_iteration = {});

enum class InitMode { uniform, jittered_grid, from_file };

InitMode parse_init_mode(const std::string& name);

struct InitSpec {
  InitMode mode = InitMode::uniform;
  std::size_t count = 1;
  GridSpec bounds;
  std::size_t class_count = 2;
  std::uint64_t seed = 0;
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
  // jittered_grid: displacement as a fraction of lattice spacing, uniform in
  // [-jitter/2, jitter/2] per axis.
  double jitter = 0.5;
  std::filesystem::path path;  // from_file
};

// Initial scene. Generated modes use mid-range scales (raw scale 0), identity
// rotations and uniform semantics.
GaussianScene init_scene(const InitSpec& spec);

}  // namespace gsocc
