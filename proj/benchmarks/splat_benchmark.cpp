#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "gsocc/fit.hpp"
#include "gsocc/losses.hpp"
#include "gsocc/metrics.hpp"
#include "gsocc/random.hpp"
#include "gsocc/splat.hpp"
#include "gsocc/synthetic.hpp"

namespace {

using namespace gsocc;

GaussianScene nuscenes_scene(std::size_t count) {
  RandomSceneOptions o;
  o.count = count;
  o.class_count = 18;
  o.seed = 7;
  return random_scene(GridSpec::nuscenes(), o);
}

void BM_BuildIndex(benchmark::State& state) {
  const GaussianScene scene = nuscenes_scene(static_cast<std::size_t>(state.range(0)));
  const GridSpec spec = GridSpec::nuscenes();
  std::uint64_t pairs = 0;
  for (auto _ : state) {
    const SplatIndex index = build_splat_index(scene, spec);
    pairs = index.pair_count();
    benchmark::DoNotOptimize(pairs);
  }
  state.counters["pairs"] = static_cast<double>(pairs);
}
BENCHMARK(BM_BuildIndex)->Arg(25600)->Arg(51200)->Arg(144000)->Unit(benchmark::kMillisecond);

// Same ladder as `gsocc bench`.
void BM_Splat(benchmark::State& state) {
  const GaussianScene scene = nuscenes_scene(static_cast<std::size_t>(state.range(0)));
  const GridSpec spec = GridSpec::nuscenes();
  SplatStats stats;
  for (auto _ : state) {
    OccupancyGrid grid = splat(scene, spec, {}, &stats);
    benchmark::DoNotOptimize(grid.labels.data());
  }
  state.counters["peak_MiB"] = static_cast<double>(stats.peak_bytes) / (1 << 20);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Splat)
    ->Arg(25600)
    ->Arg(38400)
    ->Arg(51200)
    ->Arg(91200)
    ->Arg(144000)
    ->Unit(benchmark::kMillisecond);

void BM_SplatOracle(benchmark::State& state) {
  RandomSceneOptions o;
  o.count = static_cast<std::size_t>(state.range(0));
  o.seed = 3;
  const GridSpec spec = GridSpec::cube(32, 0.1f);
  const GaussianScene scene = random_scene(spec, o);
  for (auto _ : state) {
    OccupancyGrid grid = splat_oracle(scene, spec);
    benchmark::DoNotOptimize(grid.labels.data());
  }
}
BENCHMARK(BM_SplatOracle)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const GridSpec spec = GridSpec::cube(16, 0.1f);
  RandomSceneOptions o;
  o.count = static_cast<std::size_t>(state.range(0));
  o.class_count = 8;
  o.seed = 5;
  const GaussianScene scene = random_scene(spec, o);
  std::vector<RawGaussianParams> params;
  std::vector<ActivatedGaussian> active;
  for (std::size_t g = 0; g < scene.size(); ++g) {
    params.push_back(to_raw(scene[g], kDefaultScaleMin, kDefaultScaleMax));
    active.push_back(activate(params.back(), kDefaultScaleMin, kDefaultScaleMax));
  }
  SplatOptions exact;
  exact.cutoff_sigma = kExactCutoff;
  const SplatIndex index = build_splat_index(scene, spec, exact);
  Rng rng(1);
  std::vector<std::uint8_t> truth(spec.voxel_count());
  for (auto& t : truth) t = static_cast<std::uint8_t>(rng.below(8));
  for (auto _ : state) {
    const std::vector<double> scores = forward_scores(active, 8, index);
    const VoxelLoss loss = voxel_losses(scores, 8, truth);
    auto grads = backward_splat(params, index, loss.grad, 8, kDefaultScaleMin, kDefaultScaleMax);
    benchmark::DoNotOptimize(grads.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Confusion(benchmark::State& state) {
  const GridSpec spec = GridSpec::nuscenes();
  OccupancyGrid pred(spec, 18), truth(spec, 18);
  Rng rng(2);
  for (auto& l : pred.labels) l = static_cast<std::uint8_t>(rng.below(18));
  for (auto& l : truth.labels) l = static_cast<std::uint8_t>(rng.below(18));
  for (auto _ : state) {
    const IouResult r = miou(confusion(pred, truth, static_cast<int>(state.range(0))));
    benchmark::DoNotOptimize(r.miou);
  }
}
BENCHMARK(BM_Confusion)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
