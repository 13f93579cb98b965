#include "gsocc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gsocc/errors.hpp"

namespace gsocc {

std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_fg) {
  const std::size_t n = sorted_fg.size();
  std::vector<double> grad(n);
  double gts = 0.0;
  for (const std::uint8_t f : sorted_fg) gts += f;
  double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum_fg += sorted_fg[k];
    cum_bg += 1 - sorted_fg[k];
    const double inter = gts - cum_fg;
    const double uni = gts + cum_bg;
    const double jac = 1.0 - inter / uni;
    grad[k] = jac - prev;
    prev = jac;
  }
  return grad;
}

VoxelLoss voxel_losses(std::span<const double> scores, std::size_t class_count,
                       std::span<const std::uint8_t> truth, const LossWeights& weights) {
  if (class_count == 0 || scores.size() != truth.size() * class_count) {
    throw ShapeError("score buffer does not match truth voxel count x class count");
  }
  const std::size_t nvox = truth.size();
  std::vector<std::uint32_t> valid;
  valid.reserve(nvox);
  for (std::size_t v = 0; v < nvox; ++v) {
    if (truth[v] == kIgnoreLabel) continue;
    if (truth[v] >= class_count) {
      throw InvalidArgumentError("truth label " + std::to_string(truth[v]) + " out of range");
    }
    valid.push_back(static_cast<std::uint32_t>(v));
  }
  if (valid.empty()) throw UndefinedMetricError("loss undefined: every truth voxel is ignored");

  VoxelLoss out;
  out.valid_voxels = valid.size();
  out.grad.assign(scores.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(valid.size());

  // Softmax probabilities of valid voxels, compact layout.
  std::vector<double> prob(valid.size() * class_count);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const double* s = scores.data() + static_cast<std::size_t>(valid[i]) * class_count;
    double* p = prob.data() + i * class_count;
    const double mx = *std::max_element(s, s + class_count);
    double sum = 0.0;
    for (std::size_t c = 0; c < class_count; ++c) {
      p[c] = std::exp(s[c] - mx);
      sum += p[c];
    }
    const double log_sum = std::log(sum) + mx;
    for (std::size_t c = 0; c < class_count; ++c) p[c] /= sum;
    out.ce += (log_sum - s[truth[valid[i]]]) * inv_n;
  }

  // d loss / d prob from the Lovasz term.
  std::vector<double> d_prob(prob.size(), 0.0);
  std::vector<std::size_t> present;
  {
    std::vector<std::uint8_t> seen(class_count, 0);
    for (const std::uint32_t v : valid) seen[truth[v]] = 1;
    for (std::size_t c = 0; c < class_count; ++c) {
      if (seen[c]) present.push_back(c);
    }
  }
  const double inv_classes = 1.0 / static_cast<double>(present.size());
  std::vector<std::uint32_t> order(valid.size());
  std::vector<double> errors(valid.size());
  std::vector<std::uint8_t> sorted_fg(valid.size());
  for (const std::size_t c : present) {
    for (std::size_t i = 0; i < valid.size(); ++i) {
      const double fg = truth[valid[i]] == c ? 1.0 : 0.0;
      errors[i] = std::abs(fg - prob[i * class_count + c]);
    }
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return errors[a] > errors[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      sorted_fg[k] = truth[valid[order[k]]] == c ? 1 : 0;
    }
    const std::vector<double> g = lovasz_grad(sorted_fg);
    double loss_c = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::uint32_t i = order[k];
      loss_c += errors[i] * g[k];
      // e = |fg - p|: de/dp = -1 for foreground, +1 otherwise.
      const double sign = sorted_fg[k] ? -1.0 : 1.0;
      d_prob[i * class_count + c] += weights.lovasz * inv_classes * g[k] * sign;
    }
    out.lovasz += loss_c * inv_classes;
  }

  // Chain through softmax and add the cross-entropy gradient (p - onehot) / n.
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const double* p = prob.data() + i * class_count;
    const double* dp = d_prob.data() + i * class_count;
    double dot = 0.0;
    for (std::size_t c = 0; c < class_count; ++c) dot += p[c] * dp[c];
    double* g = out.grad.data() + static_cast<std::size_t>(valid[i]) * class_count;
    const std::uint8_t t = truth[valid[i]];
    for (std::size_t c = 0; c < class_count; ++c) {
      const double ce_grad = (p[c] - (c == t ? 1.0 : 0.0)) * inv_n;
      g[c] = weights.ce * ce_grad + p[c] * (dp[c] - dot);
    }
  }

  out.loss = weights.ce * out.ce + weights.lovasz * out.lovasz;
  return out;
}

VoxelLoss voxel_losses(const OccupancyGrid& pred, const OccupancyGrid& truth,
                       const LossWeights& weights) {
  if (!(pred.spec == truth.spec) || pred.class_count != truth.class_count) {
    throw ShapeError("prediction and truth grids differ in spec or class count");
  }
  if (!pred.has_scores()) throw InvalidArgumentError("prediction grid carries no scores");
  const std::vector<double> scores(pred.scores.begin(), pred.scores.end());
  return voxel_losses(scores, pred.class_count, truth.labels, weights);
}

}  // namespace gsocc
