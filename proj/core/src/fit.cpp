#include "gsocc/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gsocc/errors.hpp"
#include "gsocc/metrics.hpp"
#include "gsocc/parallel.hpp"
#include "gsocc/random.hpp"
#include "gsocc/scene_io.hpp"

namespace gsocc {

namespace {

constexpr double kScaleClampMargin = 1e-6;

double logit(double p) { return std::log(p / (1.0 - p)); }

std::size_t param_width(std::size_t class_count) { return 10 + class_count; }

bool is_probability_vector(std::span<const float> c) {
  double sum = 0.0;
  for (const float x : c) {
    if (!(x >= 0.0f)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) < 1e-4;
}

std::vector<ActivatedGaussian> activate_all(std::span<const RawGaussianParams> params,
                                            double s_min, double s_max, int threads) {
  std::vector<ActivatedGaussian> out(params.size());
  parallel_for(params.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t g = b; g < e; ++g) out[g] = activate(params[g], s_min, s_max);
  });
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (iterations < 1) throw InvalidArgumentError("iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidArgumentError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgumentError("weight decay must be non-negative");
  if (!(s_min > 0.0) || !(s_min < s_max)) throw InvalidArgumentError("require 0 < s_min < s_max");
  if (!(cutoff_sigma > 0.0)) throw InvalidArgumentError("cutoff sigma must be positive");
  if (!(loss_weights.ce >= 0.0) || !(loss_weights.lovasz >= 0.0)) {
    throw InvalidArgumentError("loss weights must be non-negative");
  }
  if (warmup_iterations < 0) throw InvalidArgumentError("warmup iterations must be non-negative");
}

RawGaussianParams to_raw(const SemanticGaussian& g, double s_min, double s_max) {
  RawGaussianParams p;
  p.mean = g.mean.cast<double>();
  for (int a = 0; a < 3; ++a) {
    const double t = (static_cast<double>(g.scale[a]) - s_min) / (s_max - s_min);
    p.raw_scale[a] = logit(std::clamp(t, kScaleClampMargin, 1.0 - kScaleClampMargin));
  }
  p.rotation = g.rotation.cast<double>();
  p.rotation /= p.rotation.norm();
  p.raw_logits.resize(g.logits.size());
  const bool probs = is_probability_vector(g.logits);
  for (std::size_t c = 0; c < g.logits.size(); ++c) {
    const double x = g.logits[c];
    p.raw_logits[c] = probs ? std::log(std::max(x, 1e-12)) : x;
  }
  return p;
}

ActivatedGaussian activate(const RawGaussianParams& p, double s_min, double s_max) {
  ActivatedProperties a = activate(p.raw_scale, p.raw_logits, s_min, s_max);
  ActivatedGaussian out;
  out.geometry.mean = p.mean;
  out.geometry.scale = a.scale;
  out.geometry.rotation = p.rotation;
  out.semantics = std::move(a.semantics);
  return out;
}

SemanticGaussian to_semantic(const RawGaussianParams& p, double s_min, double s_max) {
  const ActivatedGaussian a = activate(p, s_min, s_max);
  Eigen::Vector3f scale;
  for (int i = 0; i < 3; ++i) {
    // float rounding must not step outside [s_min, s_max]
    scale[i] = std::clamp(static_cast<float>(a.geometry.scale[i]),
                          std::nextafter(static_cast<float>(s_min), std::numeric_limits<float>::infinity()),
                          std::nextafter(static_cast<float>(s_max), 0.0f));
  }
  std::vector<float> sem(a.semantics.begin(), a.semantics.end());
  return make_gaussian(p.mean.cast<float>(), scale, p.rotation.cast<float>(), std::move(sem));
}

GaussianScene to_scene(std::span<const RawGaussianParams> params, std::size_t class_count,
                       double s_min, double s_max) {
  GaussianScene scene(class_count);
  scene.reserve(params.size());
  for (const RawGaussianParams& p : params) scene.add(to_semantic(p, s_min, s_max));
  return scene;
}

std::vector<double> forward_scores(std::span<const ActivatedGaussian> gaussians,
                                   std::size_t class_count, const SplatIndex& index, int threads) {
  threads = resolve_thread_count(threads);
  if (index.gaussian_count() != gaussians.size()) {
    throw ShapeError("splat index does not match the gaussian count");
  }
  const GridSpec& spec = index.spec();
  std::vector<Mat3> inv_cov(gaussians.size());
  for (std::size_t g = 0; g < gaussians.size(); ++g) {
    inv_cov[g] = inverse_covariance(gaussians[g].geometry.scale, gaussians[g].geometry.rotation);
  }
  std::vector<double> scores(index.voxel_count() * class_count, 0.0);
  parallel_for(index.voxel_count(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) {
      const Vec3 center = spec.center(static_cast<std::uint32_t>(v));
      double* out = scores.data() + v * class_count;
      for (const SplatPair& pair : index.voxel_range(static_cast<std::uint32_t>(v))) {
        const ActivatedGaussian& ag = gaussians[pair.gaussian];
        const Vec3 d = center - ag.geometry.mean;
        const double w = std::exp(-0.5 * d.dot(inv_cov[pair.gaussian] * d));
        for (std::size_t c = 0; c < class_count; ++c) out[c] += w * ag.semantics[c];
      }
    }
  });
  return scores;
}

std::vector<RawGaussianGrad> backward_splat(std::span<const RawGaussianParams> params,
                                            const SplatIndex& index,
                                            std::span<const double> d_scores,
                                            std::size_t class_count, double s_min, double s_max,
                                            int threads) {
  threads = resolve_thread_count(threads);
  if (index.gaussian_count() != params.size()) {
    throw ShapeError("splat index does not match the gaussian count");
  }
  if (d_scores.size() != index.voxel_count() * class_count) {
    throw ShapeError("score gradient does not match voxel count x class count");
  }
  const GridSpec& spec = index.spec();
  std::vector<RawGaussianGrad> grads(params.size());

  parallel_for(params.size(), threads, [&](std::size_t b, std::size_t e) {
    std::vector<double> d_sem(class_count);
    for (std::size_t g = b; g < e; ++g) {
      const ActivatedGaussian ag = activate(params[g], s_min, s_max);
      const WeightGradientEvaluator eval(ag.geometry);
      std::fill(d_sem.begin(), d_sem.end(), 0.0);
      Vec3 d_mean = Vec3::Zero();
      Vec3 d_scale = Vec3::Zero();
      Quat d_rot = Quat::Zero();

      for (const SplatPair& pair : index.gaussian_range(static_cast<std::uint32_t>(g))) {
        const double* up = d_scores.data() + static_cast<std::size_t>(pair.voxel) * class_count;
        double d_weight = 0.0;
        for (std::size_t c = 0; c < class_count; ++c) d_weight += ag.semantics[c] * up[c];
        const WeightGradient wg = eval(spec.center(pair.voxel));
        for (std::size_t c = 0; c < class_count; ++c) d_sem[c] += wg.weight * up[c];
        if (d_weight != 0.0) {
          d_mean += d_weight * wg.d_mean;
          d_scale += d_weight * wg.d_scale;
          d_rot += d_weight * wg.d_rotation;
        }
      }

      RawGaussianGrad& out = grads[g];
      out.mean = d_mean;
      out.rotation = d_rot;
      for (int a = 0; a < 3; ++a) {
        const double sg = sigmoid(params[g].raw_scale[a]);
        out.raw_scale[a] = d_scale[a] * sg * (1.0 - sg) * (s_max - s_min);
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < class_count; ++c) dot += ag.semantics[c] * d_sem[c];
      out.raw_logits.resize(class_count);
      for (std::size_t c = 0; c < class_count; ++c) {
        out.raw_logits[c] = ag.semantics[c] * (d_sem[c] - dot);
      }
    }
  });
  return grads;
}

std::vector<RawGaussianParams> refine_step(std::span<const RawGaussianParams> params,
                                           std::span<const RefinementProposal> proposals) {
  if (params.size() != proposals.size()) {
    throw ShapeError("proposal count does not match parameter count");
  }
  std::vector<RawGaussianParams> out(params.size());
  for (std::size_t g = 0; g < params.size(); ++g) {
    if (proposals[g].raw_logits.size() != params[g].raw_logits.size()) {
      throw ShapeError("proposal logits do not match parameter logits");
    }
    out[g].mean = params[g].mean + proposals[g].mean_residual;
    out[g].raw_scale = proposals[g].raw_scale;
    const double n = proposals[g].rotation.norm();
    if (!(n >= kMinQuaternionNorm)) {
      throw DegenerateRotationError("proposed rotation of gaussian " + std::to_string(g) +
                                    " has near-zero norm");
    }
    out[g].rotation = proposals[g].rotation / n;
    out[g].raw_logits = proposals[g].raw_logits;
  }
  return out;
}

AdamW::AdamW(const FitConfig& config) : config_(config) {}

double AdamW::learning_rate_at(int step) const {
  if (!config_.cosine_schedule) return config_.learning_rate;
  if (step < config_.warmup_iterations) {
    return config_.learning_rate * static_cast<double>(step + 1) /
           static_cast<double>(config_.warmup_iterations);
  }
  const int decay_steps = std::max(1, config_.iterations - config_.warmup_iterations);
  const double t = std::min(1.0, static_cast<double>(step - config_.warmup_iterations) / decay_steps);
  return config_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<RefinementProposal> AdamW::propose(std::span<const RawGaussianParams> params,
                                               std::span<const RawGaussianGrad> grads) {
  if (params.size() != grads.size()) throw ShapeError("gradient count does not match parameters");
  const std::size_t classes = params.empty() ? 0 : params.front().raw_logits.size();
  const std::size_t width = param_width(classes);
  if (m_.empty()) {
    m_.assign(params.size() * width, 0.0);
    v_.assign(params.size() * width, 0.0);
  } else if (m_.size() != params.size() * width) {
    throw ShapeError("parameter count changed between optimizer steps");
  }

  const double lr = learning_rate_at(step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);

  // One parameter: returns the additive step.
  auto update = [&](std::size_t slot, double value, double grad, bool decay) {
    double& m = m_[slot];
    double& v = v_[slot];
    m = config_.beta1 * m + (1.0 - config_.beta1) * grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * grad * grad;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    double step = -lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    if (decay) step -= lr * config_.weight_decay * value;
    return step;
  };

  std::vector<RefinementProposal> out(params.size());
  for (std::size_t g = 0; g < params.size(); ++g) {
    const RawGaussianParams& p = params[g];
    const RawGaussianGrad& d = grads[g];
    std::size_t slot = g * width;
    RefinementProposal& r = out[g];
    for (int a = 0; a < 3; ++a) r.mean_residual[a] = update(slot++, p.mean[a], d.mean[a], false);
    for (int a = 0; a < 3; ++a) {
      r.raw_scale[a] = p.raw_scale[a] + update(slot++, p.raw_scale[a], d.raw_scale[a], true);
    }
    for (int a = 0; a < 4; ++a) {
      r.rotation[a] = p.rotation[a] + update(slot++, p.rotation[a], d.rotation[a], false);
    }
    r.raw_logits.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      r.raw_logits[c] = p.raw_logits[c] + update(slot++, p.raw_logits[c], d.raw_logits[c], true);
    }
  }
  return out;
}

FitReport fit(const GaussianScene& initial, const OccupancyGrid& truth, const FitConfig& config,
              const FitCallback& on_iteration) {
  config.validate();
  truth.validate();
  if (initial.class_count() != truth.class_count) {
    throw ShapeError("initial scene has " + std::to_string(initial.class_count()) +
                     " classes, truth grid has " + std::to_string(truth.class_count));
  }
  const std::size_t classes = truth.class_count;
  const int threads = resolve_thread_count(config.threads);

  std::vector<RawGaussianParams> params;
  params.reserve(initial.size());
  for (const SemanticGaussian& g : initial) params.push_back(to_raw(g, config.s_min, config.s_max));

  SplatOptions splat_opts;
  splat_opts.cutoff_sigma = config.cutoff_sigma;
  splat_opts.threads = threads;
  const bool exact = std::isinf(config.cutoff_sigma);
  SplatIndex index;
  if (exact) index = build_splat_index(initial, truth.spec, splat_opts);

  AdamW optimizer(config);
  FitReport report;
  report.iterations.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<std::uint8_t> labels(truth.voxel_count());

  for (int it = 0; it < config.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!exact) {
      index = build_splat_index(to_scene(params, classes, config.s_min, config.s_max), truth.spec,
                                splat_opts);
    }
    const std::vector<ActivatedGaussian> active =
        activate_all(params, config.s_min, config.s_max, threads);
    const std::vector<double> scores = forward_scores(active, classes, index, threads);
    const VoxelLoss loss = voxel_losses(scores, classes, truth.labels, config.loss_weights);
    if (!std::isfinite(loss.loss)) {
      throw DivergenceError("fit loss became non-finite", it);
    }

    FitIteration rec;
    rec.iteration = it;
    rec.loss = loss.loss;
    rec.ce_loss = loss.ce;
    rec.lovasz_loss = loss.lovasz;
    for (std::size_t v = 0; v < labels.size(); ++v) {
      const double* s = scores.data() + v * classes;
      labels[v] = static_cast<std::uint8_t>(std::max_element(s, s + classes) - s);
    }
    OccupancyGrid pred(truth.spec, classes, false);
    pred.labels = labels;
    const ConfusionMatrix cm = confusion(pred, truth);
    try {
      rec.miou = miou(cm).miou;
    } catch (const UndefinedMetricError&) {
      rec.miou = std::numeric_limits<double>::quiet_NaN();
    }
    try {
      rec.sc_iou = scene_completion_iou(cm);
    } catch (const UndefinedMetricError&) {
      rec.sc_iou = std::numeric_limits<double>::quiet_NaN();
    }

    const std::vector<RawGaussianGrad> grads =
        backward_splat(params, index, loss.grad, classes, config.s_min, config.s_max, threads);
    const std::vector<RefinementProposal> proposals = optimizer.propose(params, grads);
    params = refine_step(params, proposals);

    rec.milliseconds =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report.iterations.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }

  report.final_scene = to_scene(params, classes, config.s_min, config.s_max);
  return report;
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "uniform") return InitMode::uniform;
  if (name == "jittered-grid") return InitMode::jittered_grid;
  if (name == "from-file") return InitMode::from_file;
  throw InvalidArgumentError("unknown init mode '" + name + "'");
}

GaussianScene init_scene(const InitSpec& spec) {
  if (spec.mode == InitMode::from_file) {
    GaussianScene scene = read_scene(spec.path);
    if (scene.class_count() != spec.class_count) {
      throw ShapeError("initial scene has " + std::to_string(scene.class_count()) +
                       " classes, expected " + std::to_string(spec.class_count));
    }
    return scene;
  }
  if (spec.count < 1) throw InvalidArgumentError("init_scene needs at least one gaussian");
  if (spec.class_count < 1) throw InvalidArgumentError("init_scene needs at least one class");
  spec.bounds.validate();

  Rng rng(spec.seed);
  const Vec3 lo = spec.bounds.min_corner();
  const Vec3 hi = spec.bounds.max_corner();
  const Vec3 extent = hi - lo;
  const float mid_scale = static_cast<float>(0.5 * (spec.s_min + spec.s_max));
  const std::vector<float> uniform_sem(spec.class_count, 1.0f / static_cast<float>(spec.class_count));

  auto make = [&](const Vec3& mean) {
    return make_gaussian(mean.cast<float>(), Eigen::Vector3f::Constant(mid_scale),
                         Eigen::Vector4f(1.0f, 0.0f, 0.0f, 0.0f), uniform_sem);
  };

  GaussianScene scene(spec.class_count);
  scene.reserve(spec.count);
  if (spec.mode == InitMode::uniform) {
    for (std::size_t g = 0; g < spec.count; ++g) {
      Vec3 m;
      for (int a = 0; a < 3; ++a) m[a] = rng.uniform(lo[a], hi[a]);
      scene.add(make(m));
    }
    return scene;
  }

  // Lattice with n_a points per axis proportional to the extents, grown on
  // the sparsest axis until it holds count points.
  std::array<std::size_t, 3> n{};
  const double volume = extent.prod();
  const double spacing = std::cbrt(volume / static_cast<double>(spec.count));
  for (int a = 0; a < 3; ++a) {
    n[a] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(extent[a] / spacing)));
  }
  while (n[0] * n[1] * n[2] < spec.count) {
    int grow = 0;
    for (int a = 1; a < 3; ++a) {
      if (extent[a] / static_cast<double>(n[a]) > extent[grow] / static_cast<double>(n[grow])) grow = a;
    }
    ++n[grow];
  }
  for (std::size_t idx = 0; idx < spec.count; ++idx) {
    const std::size_t cell[3] = {idx / (n[1] * n[2]), (idx / n[2]) % n[1], idx % n[2]};
    Vec3 m;
    for (int a = 0; a < 3; ++a) {
      const double step = extent[a] / static_cast<double>(n[a]);
      const double jitter = spec.jitter > 0.0 ? spec.jitter * (rng.uniform() - 0.5) * step : 0.0;
      m[a] = lo[a] + (static_cast<double>(cell[a]) + 0.5) * step + jitter;
    }
    scene.add(make(m));
  }
  return scene;
}

}  // namespace gsocc
