#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "gsocc/errors.hpp"
#include "gsocc/parallel.hpp"
#include "gsocc/random.hpp"
#include "gsocc/splat.hpp"
#include "gsocc/synthetic.hpp"
#include "oracles.hpp"

namespace gsocc {
namespace {

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

GaussianScene scene_of(std::vector<SemanticGaussian> gs, std::size_t classes) {
  GaussianScene scene(classes);
  for (SemanticGaussian& g : gs) scene.add(std::move(g));
  return scene;
}

GaussianScene corpus_scene(const GridSpec& spec, std::uint64_t seed, std::size_t count) {
  RandomSceneOptions o;
  o.count = count;
  o.class_count = 5;
  o.s_min = 0.02;
  o.s_max = 0.3;
  o.seed = seed;
  return random_scene(spec, o);
}

TEST(VoxelizeMeans, FirstVoxelCenter) {
  const GridSpec spec = GridSpec::cube(4, 0.5f, {-1, -1, -1});
  const GaussianScene scene = scene_of({make_gaussian({-0.75f, -0.75f, -0.75f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {1.0f})}, 1);
  const std::vector<MeanVoxel> mv = voxelize_means(scene, spec);
  ASSERT_EQ(mv.size(), 1u);
  ASSERT_TRUE(mv[0].in_volume());
  EXPECT_EQ(*mv[0].voxel, 0u);
}

TEST(VoxelizeMeans, OutsideFlagged) {
  const GridSpec spec = GridSpec::cube(4, 0.5f, {0, 0, 0});
  const GaussianScene scene = scene_of({make_gaussian({2.0f, 1.0f, 1.0f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {1.0f}),
                                        make_gaussian({-0.01f, 1.0f, 1.0f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {1.0f}),
                                        make_gaussian({1.99f, 1.99f, 0.0f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {1.0f})},
                                       1);
  const std::vector<MeanVoxel> mv = voxelize_means(scene, spec);
  EXPECT_FALSE(mv[0].in_volume());  // upper bound is exclusive
  EXPECT_FALSE(mv[1].in_volume());
  ASSERT_TRUE(mv[2].in_volume());
  EXPECT_EQ(*mv[2].voxel, spec.linear_index(3, 3, 0));
}

TEST(VoxelizeMeans, BoundaryGoesToHigherIndex) {
  const GridSpec spec = GridSpec::cube(4, 0.5f, {0, 0, 0});
  const GaussianScene scene = scene_of({make_gaussian({1.0f, 0.5f, 0.25f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {1.0f})}, 1);
  const std::vector<MeanVoxel> mv = voxelize_means(scene, spec);
  ASSERT_TRUE(mv[0].in_volume());
  EXPECT_EQ(*mv[0].voxel, spec.linear_index(2, 1, 0));
}

TEST(NeighborhoodRadius, Examples) {
  const SemanticGaussian a = make_gaussian({0, 0, 0}, {1, 1, 1}, {1, 0, 0, 0}, {1.0f});
  EXPECT_TRUE(neighborhood_radius(a, 3.0).isApprox(Vec3(3, 3, 3)));
  const SemanticGaussian b = make_gaussian({0, 0, 0}, {0.1f, 0.2f, 0.3f}, {1, 0, 0, 0}, {1.0f});
  const Vec3 r = neighborhood_radius(b, 3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r[i], 0.9, 1e-6);
  EXPECT_THROW(neighborhood_radius(a, 0.0), InvalidArgumentError);
}

TEST(NeighborhoodRadius, BoxContainsCutoffEllipsoid) {
  Rng rng(21);
  for (int n = 0; n < 200; ++n) {
    const Vec3 s(rng.uniform(0.05, 1), rng.uniform(0.05, 1), rng.uniform(0.05, 1));
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const SemanticGaussian g = make_gaussian({0, 0, 0}, s.cast<float>(), q.cast<float>(), {1.0f});
    const Vec3 r = neighborhood_radius(g, 3.0);
    const GaussianGeometry geo = GaussianGeometry::from(g);
    for (int k = 0; k < 2000; ++k) {
      const Vec3 p(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
      if (std::abs(p.x()) > r.x() || std::abs(p.y()) > r.y() || std::abs(p.z()) > r.z()) {
        EXPECT_GT(std::sqrt(mahalanobis_squared(geo, p)), 3.0);
      }
    }
  }
}

TEST(NeighborhoodBox, MatchesCenterPredicate) {
  Rng rng(22);
  const GridSpec spec = GridSpec::cube(16, 0.25f, {-2, -2, -2});
  for (int n = 0; n < 300; ++n) {
    const Vec3 m(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Vec3 r = Vec3::Constant(rng.uniform(0.0, 1.5));
    const VoxelBox box = neighborhood_box(spec, m, r);
    std::uint64_t inside = 0;
    for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
      const Vec3 c = spec.center(v);
      const bool in = (c - m).cwiseAbs().maxCoeff() <= r.x();
      const VoxelCoord ijk = spec.coord(v);
      bool in_box = !box.empty();
      for (int a = 0; a < 3 && in_box; ++a) in_box = ijk[a] >= box.lo[a] && ijk[a] <= box.hi[a];
      EXPECT_EQ(in, in_box);
      inside += in;
    }
    EXPECT_EQ(inside, box.voxel_count());
  }
}

TEST(SplatIndex, EmptyScene) {
  const GridSpec spec = GridSpec::cube(8);
  const SplatIndex index = build_splat_index(GaussianScene(3), spec);
  EXPECT_EQ(index.pair_count(), 0u);
  ASSERT_EQ(index.voxel_count(), spec.voxel_count());
  for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) EXPECT_TRUE(index.voxel_range(v).empty());
}

TEST(SplatIndex, TinyGaussianCoversOnlyItsBox) {
  const GridSpec spec = GridSpec::cube(10, 0.1f, {0, 0, 0});
  // Radius 3 * 0.05 = 0.15 around a voxel center reaches one neighbor per side.
  const GaussianScene scene = scene_of({make_gaussian({0.45f, 0.45f, 0.45f}, {0.05f, 0.02f, 0.02f}, {1, 0, 0, 0}, {1.0f})}, 1);
  const SplatIndex index = build_splat_index(scene, spec);
  std::set<std::uint32_t> got;
  for (const SplatPair& p : index.pairs()) got.insert(p.voxel);
  std::set<std::uint32_t> expected;
  for (std::uint32_t i = 3; i <= 5; ++i)
    for (std::uint32_t j = 3; j <= 5; ++j)
      for (std::uint32_t k = 3; k <= 5; ++k) expected.insert(spec.linear_index(i, j, k));
  EXPECT_EQ(got, expected);
}

TEST(SplatIndex, PairSetMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    const std::uint32_t n = 8 + static_cast<std::uint32_t>(rng.below(25));
    const GridSpec spec = GridSpec::cube(n, 0.1f, {-0.5f, -0.3f, -0.1f});
    RandomSceneOptions o;
    o.count = 1 + rng.below(100);
    o.class_count = 3;
    o.margin = 0.3;
    o.seed = seed;
    const GaussianScene scene = random_scene(spec, o);
    const double cutoff = rng.uniform(0.5, 4.0);
    SplatOptions so;
    so.cutoff_sigma = cutoff;
    const SplatIndex index = build_splat_index(scene, spec, so);

    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (const SplatPair& p : index.pairs()) got.emplace(p.gaussian, p.voxel);
    EXPECT_EQ(got.size(), index.pair_count());
    EXPECT_EQ(got, testing::brute_force_pairs(scene, spec, cutoff)) << "seed " << seed;
  }
}

TEST(SplatIndex, SortedAndPartitioned) {
  const GridSpec spec = GridSpec::cube(20, 0.1f);
  const GaussianScene scene = corpus_scene(spec, 3, 150);
  const SplatIndex index = build_splat_index(scene, spec);
  const auto pairs = index.pairs();
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    EXPECT_TRUE(std::pair(pairs[i - 1].voxel, pairs[i - 1].gaussian) < std::pair(pairs[i].voxel, pairs[i].gaussian));
  }
  const auto off = index.voxel_offsets();
  EXPECT_EQ(off.front(), 0u);
  EXPECT_EQ(off.back(), pairs.size());
  for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
    for (const SplatPair& p : index.voxel_range(v)) EXPECT_EQ(p.voxel, v);
  }
  std::size_t total = 0;
  for (std::uint32_t g = 0; g < scene.size(); ++g) {
    const auto r = index.gaussian_range(g);
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_EQ(r[i].gaussian, g);
      if (i > 0) {
        EXPECT_LT(r[i - 1].voxel, r[i].voxel);
      }
    }
    total += r.size();
  }
  EXPECT_EQ(total, pairs.size());
}

TEST(SplatIndex, CapacityErrorReportsCount) {
  const GridSpec spec = GridSpec::cube(8);
  const GaussianScene scene = scene_of({make_gaussian({4, 4, 4}, {1, 1, 1}, {1, 0, 0, 0}, {1.0f}),
                                        make_gaussian({4, 4, 4}, {1, 1, 1}, {1, 0, 0, 0}, {1.0f})},
                                       1);
  SplatOptions o;
  o.cutoff_sigma = kExactCutoff;
  o.max_pairs = 1000;
  try {
    build_splat_index(scene, spec, o);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.requested(), 1024u);
  }
}

TEST(SplatIndex, PairCountMonotone) {
  const GridSpec spec = GridSpec::cube(24, 0.1f);
  GaussianScene scene = corpus_scene(spec, 9, 60);
  std::size_t prev = 0;
  for (double cutoff : {0.5, 1.0, 2.0, 3.0, 4.0, 6.0}) {
    SplatOptions o;
    o.cutoff_sigma = cutoff;
    const std::size_t n = build_splat_index(scene, spec, o).pair_count();
    EXPECT_GE(n, prev);
    prev = n;
  }
  SplatOptions o;
  std::size_t before = build_splat_index(scene, spec, o).pair_count();
  for (std::size_t g = 0; g < scene.size(); g += 3) {
    scene[g].scale *= 1.5f;
    const std::size_t after = build_splat_index(scene, spec, o).pair_count();
    EXPECT_GE(after, before);
    before = after;
  }
}

TEST(Splat, SingleGaussianAtVoxelCenter) {
  const GridSpec spec = GridSpec::cube(5, 1.0f);
  const GaussianScene scene = scene_of({make_gaussian({2.5f, 2.5f, 2.5f}, {0.2f, 0.2f, 0.2f}, {1, 0, 0, 0}, {0.1f, 0.7f, 0.2f})}, 3);
  const OccupancyGrid grid = splat(scene, spec);
  const auto s = grid.scores_at(spec.linear_index(2, 2, 2));
  EXPECT_EQ(s[0], 0.1f);
  EXPECT_EQ(s[1], 0.7f);
  EXPECT_EQ(s[2], 0.2f);
  EXPECT_EQ(grid.labels[spec.linear_index(2, 2, 2)], 1);
}

TEST(Splat, Superposition) {
  const GridSpec spec = GridSpec::cube(5, 1.0f);
  const SemanticGaussian g = make_gaussian({2.5f, 2.5f, 2.5f}, {0.8f, 0.5f, 0.3f}, {1, 0.2f, 0, 0}, {0.25f, 0.75f});
  const OccupancyGrid one = splat(scene_of({g}, 2), spec);
  const OccupancyGrid two = splat(scene_of({g, g}, 2), spec);
  const std::uint32_t v = spec.linear_index(2, 2, 2);
  EXPECT_EQ(two.scores_at(v)[0], 2 * one.scores_at(v)[0]);
  EXPECT_EQ(two.scores_at(v)[1], 2 * one.scores_at(v)[1]);
}

TEST(Splat, EmptySceneIsEmptyGrid) {
  const GridSpec spec = GridSpec::cube(6);
  const OccupancyGrid grid = splat(GaussianScene(4), spec);
  EXPECT_TRUE(std::all_of(grid.labels.begin(), grid.labels.end(), [](auto l) { return l == 0; }));
  EXPECT_TRUE(std::all_of(grid.scores.begin(), grid.scores.end(), [](float s) { return s == 0.0f; }));
  const OccupancyGrid oracle = splat_oracle(GaussianScene(4), spec);
  EXPECT_EQ(oracle.labels, grid.labels);
}

TEST(Splat, IsotropicDecaysWithDistance) {
  const GridSpec spec = GridSpec::cube(15, 0.1f);
  const GaussianScene scene = scene_of({make_gaussian({0.75f, 0.75f, 0.75f}, {0.2f, 0.2f, 0.2f}, {1, 0, 0, 0}, {1.0f})}, 1);
  const OccupancyGrid grid = splat_oracle(scene, spec);
  const Vec3 m(0.75, 0.75, 0.75);
  std::vector<std::pair<double, float>> by_distance;
  for (std::uint32_t v = 0; v < spec.voxel_count(); ++v) {
    by_distance.emplace_back((spec.center(v) - m).norm(), grid.scores[v]);
  }
  std::sort(by_distance.begin(), by_distance.end());
  for (std::size_t i = 1; i < by_distance.size(); ++i) {
    if (by_distance[i].first > by_distance[i - 1].first + 1e-9) {
      EXPECT_LE(by_distance[i].second, by_distance[i - 1].second);
    }
  }
}

TEST(Splat, ExactModeEqualsOracleBitwise) {
  const GridSpec spec = GridSpec::cube(32, 0.05f, {-0.8f, -0.8f, -0.8f});
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const GaussianScene scene = corpus_scene(spec, seed, 1 + seed % 200);
    SplatOptions o;
    o.cutoff_sigma = kExactCutoff;
    const OccupancyGrid fast = splat(scene, spec, o);
    const OccupancyGrid oracle = splat_oracle(scene, spec);
    EXPECT_TRUE(bitwise_equal(fast.scores, oracle.scores)) << "seed " << seed;
    EXPECT_EQ(fast.labels, oracle.labels);
  }
}

TEST(Splat, OracleMatchesNaiveEvaluateLoop) {
  const GridSpec spec = GridSpec::cube(10, 0.1f);
  const GaussianScene scene = corpus_scene(spec, 77, 30);
  const OccupancyGrid oracle = splat_oracle(scene, spec);
  const std::vector<float> naive = testing::naive_splat_scores(scene, spec);
  ASSERT_EQ(oracle.scores.size(), naive.size());
  for (std::size_t i = 0; i < naive.size(); ++i) {
    EXPECT_NEAR(oracle.scores[i], naive[i], 1e-6f * std::max(1.0f, std::abs(naive[i])));
  }
}

TEST(Splat, DeterministicAcrossThreadCounts) {
  const GridSpec spec = GridSpec::cube(32, 0.05f, {-0.8f, -0.8f, -0.8f});
  const GaussianScene scene = corpus_scene(spec, 5, 200);
  const int max_threads = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  for (double cutoff : {3.0, kExactCutoff}) {
    SplatOptions o;
    o.cutoff_sigma = cutoff;
    o.threads = 1;
    const OccupancyGrid reference = splat(scene, spec, o);
    for (int threads : {1, 2, 4, 7, max_threads}) {
      o.threads = threads;
      const OccupancyGrid again = splat(scene, spec, o);
      EXPECT_TRUE(bitwise_equal(again.scores, reference.scores)) << threads;
      EXPECT_EQ(again.labels, reference.labels);
    }
  }
}

TEST(Splat, OutOfVolumeGaussianStillContributes) {
  const GridSpec spec = GridSpec::cube(4, 0.1f);
  const GaussianScene scene = scene_of({make_gaussian({-0.05f, 0.05f, 0.05f}, {0.1f, 0.1f, 0.1f}, {1, 0, 0, 0}, {0.0f, 1.0f})}, 2);
  EXPECT_FALSE(voxelize_means(scene, spec)[0].in_volume());
  const OccupancyGrid grid = splat(scene, spec);
  EXPECT_EQ(grid.labels[0], 1);
}

TEST(ArgmaxLabel, Examples) {
  const std::vector<float> a{0.2f, 0.7f, 0.1f};
  const std::vector<float> b{0.0f, 0.0f, 0.0f};
  const std::vector<float> c{0.5f, 0.5f, 0.0f};
  EXPECT_EQ(argmax_label(a), 1);
  EXPECT_EQ(argmax_label(b), 0);
  EXPECT_EQ(argmax_label(c), 0);
}

TEST(DecodeLabels, ConsistentWithScores) {
  const GridSpec spec = GridSpec::cube(12, 0.1f);
  const OccupancyGrid grid = splat(corpus_scene(spec, 41, 40), spec);
  const OccupancyGrid decoded = decode_labels(grid);
  for (std::size_t v = 0; v < grid.voxel_count(); ++v) {
    EXPECT_EQ(decoded.labels[v], argmax_label(grid.scores_at(v)));
    EXPECT_EQ(grid.labels[v], decoded.labels[v]);
  }
}

TEST(GridSpec, CentersAndIndices) {
  const GridSpec spec = GridSpec::nuscenes();
  EXPECT_EQ(spec.voxel_count(), 200u * 200u * 16u);
  const Vec3 c = spec.center(0, 0, 0);
  EXPECT_EQ(c, Vec3(-49.75, -49.75, -4.75));
  EXPECT_EQ(spec.max_corner(), Vec3(50, 50, 3));
  EXPECT_EQ(spec.linear_index(1, 2, 3), (1u * 200 + 2) * 16 + 3);
  EXPECT_EQ(spec.coord(spec.linear_index(199, 5, 15)), (VoxelCoord{199, 5, 15}));
  const GridSpec k = GridSpec::kitti360();
  EXPECT_EQ(k.voxel_count(), 256u * 256u * 32u);
  EXPECT_NEAR(k.max_corner().x() - k.min_corner().x(), 51.2, 1e-5);
  EXPECT_NEAR(k.max_corner().z() - k.min_corner().z(), 6.4, 1e-5);
}

TEST(GridSpec, ValidateRejectsBadSpecs) {
  GridSpec s = GridSpec::cube(4);
  s.dims[1] = 0;
  EXPECT_THROW(s.validate(), InvalidArgumentError);
  s = GridSpec::cube(4);
  s.cell_size.y() = -1.0f;
  EXPECT_THROW(s.validate(), InvalidArgumentError);
  s = GridSpec::cube(4);
  s.dims = {70000, 70000, 2};
  EXPECT_THROW(s.validate(), CapacityError);
}

TEST(Parallel, ThreadResolution) {
  EXPECT_EQ(resolve_thread_count(3), 3);
  EXPECT_GE(resolve_thread_count(0), 1);
}

}  // namespace
}  // namespace gsocc
