#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gsocc/grid.hpp"

namespace gsocc::cli {

// Gaussian counts of the latency ladder measured on the nuScenes volume.
inline const std::vector<std::size_t> kDefaultBenchCounts{25600, 38400, 51200, 91200, 144000};

struct BenchConfig {
  std::vector<std::size_t> counts = kDefaultBenchCounts;
  int runs = 5;
  GridSpec spec = GridSpec::nuscenes();
  std::size_t class_count = 18;
  double cutoff_sigma = 3.0;
  double s_min = 0.01;
  double s_max = 0.3;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct BenchRow {
  std::size_t count = 0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  std::uint64_t pairs = 0;
  std::uint64_t peak_bytes = 0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  // max |y - fit(x)| / fit(x) over the samples
  double max_relative_deviation = 0.0;
};

// Ordinary least squares y = slope * x + intercept.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct BenchResult {
  std::vector<BenchRow> rows;
  LinearFit latency;
  LinearFit memory;
};

// Splats a random scene of each count `runs` times and records the median.
BenchResult run_splat_benchmark(const BenchConfig& config);

}  // namespace gsocc::cli
