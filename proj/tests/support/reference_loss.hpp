#pragma once

// Straight-from-definition cross-entropy and Lovasz-softmax, with the option
// to hold the per-class error ordering fixed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"

namespace gsocc::testing {

// For each class present in truth, valid voxel indices ordered by descending
// error (stable). Absent classes get an empty order.
using ErrorOrders = std::vector<std::vector<std::size_t>>;

inline std::vector<double> class_errors(const std::vector<double>& scores, std::size_t classes,
                                        const std::vector<std::uint8_t>& truth, std::size_t c) {
  std::vector<double> errs(truth.size(), 0.0);
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (truth[v] == kIgnoreLabel) continue;
    const double p = softmax(std::span<const double>(scores.data() + v * classes, classes))[c];
    errs[v] = truth[v] == c ? 1.0 - p : p;
  }
  return errs;
}

inline ErrorOrders error_orders(const std::vector<double>& scores, std::size_t classes,
                                const std::vector<std::uint8_t>& truth) {
  ErrorOrders orders(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (std::find(truth.begin(), truth.end(), static_cast<std::uint8_t>(c)) == truth.end()) continue;
    const std::vector<double> errs = class_errors(scores, classes, truth, c);
    for (std::size_t v = 0; v < truth.size(); ++v)
      if (truth[v] != kIgnoreLabel) orders[c].push_back(v);
    std::stable_sort(orders[c].begin(), orders[c].end(),
                     [&](std::size_t a, std::size_t b) { return errs[a] > errs[b]; });
  }
  return orders;
}

// Lovasz extension of the Jaccard loss: errors walked in the given order with
// increments of |M| / |F u M| over the growing mispredicted set M.
inline double lovasz_reference(const std::vector<double>& scores, std::size_t classes,
                               const std::vector<std::uint8_t>& truth,
                               const std::optional<ErrorOrders>& frozen = std::nullopt) {
  const ErrorOrders orders = frozen ? *frozen : error_orders(scores, classes, truth);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (orders[c].empty()) continue;
    ++present;
    const std::vector<double> errs = class_errors(scores, classes, truth, c);
    const auto fg_count = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), c));
    double prev = 0.0, loss = 0.0;
    std::size_t mis = 0, mis_bg = 0;
    for (std::size_t v : orders[c]) {
      ++mis;
      mis_bg += truth[v] != c;
      const double delta = static_cast<double>(mis) / static_cast<double>(fg_count + mis_bg);
      loss += errs[v] * (delta - prev);
      prev = delta;
    }
    total += loss;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

inline double ce_reference(const std::vector<double>& scores, std::size_t classes,
                           const std::vector<std::uint8_t>& truth) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (truth[v] == kIgnoreLabel) continue;
    sum -= std::log(softmax(std::span<const double>(scores.data() + v * classes, classes))[truth[v]]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace gsocc::testing
