#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gsocc/errors.hpp"
#include "gsocc/splat.hpp"
#include "gsocc/synthetic.hpp"

namespace gsocc::cli {

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgumentError("linear fit needs at least two paired samples");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = f.slope * x[i] + f.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    if (pred != 0.0) {
      f.max_relative_deviation = std::max(f.max_relative_deviation, std::abs(y[i] - pred) / std::abs(pred));
    }
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

BenchResult run_splat_benchmark(const BenchConfig& config) {
  if (config.runs < 1) throw InvalidArgumentError("bench needs at least one run");
  BenchResult result;
  SplatOptions opts;
  opts.cutoff_sigma = config.cutoff_sigma;
  opts.threads = config.threads;

  for (const std::size_t count : config.counts) {
    RandomSceneOptions ro;
    ro.count = count;
    ro.class_count = config.class_count;
    ro.s_min = config.s_min;
    ro.s_max = config.s_max;
    ro.seed = config.seed + count;
    const GaussianScene scene = random_scene(config.spec, ro);

    std::vector<double> times;
    BenchRow row;
    row.count = count;
    for (int r = 0; r < config.runs; ++r) {
      SplatStats stats;
      const auto t0 = std::chrono::steady_clock::now();
      const OccupancyGrid grid = splat(scene, config.spec, opts, &stats);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      row.pairs = stats.pair_count;
      row.peak_bytes = stats.peak_bytes;
    }
    std::sort(times.begin(), times.end());
    row.min_ms = times.front();
    row.median_ms = times.size() % 2 == 1
                        ? times[times.size() / 2]
                        : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    result.rows.push_back(row);
  }

  if (result.rows.size() >= 2) {
    std::vector<double> x, lat, mem;
    for (const BenchRow& r : result.rows) {
      x.push_back(static_cast<double>(r.count));
      lat.push_back(r.median_ms);
      mem.push_back(static_cast<double>(r.peak_bytes));
    }
    result.latency = linear_fit(x, lat);
    result.memory = linear_fit(x, mem);
  }
  return result;
}

}  // namespace gsocc::cli
