#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "gsocc/errors.hpp"
#include "gsocc/fit.hpp"
#include "gsocc/metrics.hpp"
#include "gsocc/parallel.hpp"
#include "gsocc/scene_io.hpp"
#include "gsocc/splat.hpp"
#include "gsocc/synthetic.hpp"

namespace gsocc::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double x, int precision = 6) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

struct GridFlags {
  std::string preset = "nuscenes";
  std::vector<std::uint32_t> dims;
  std::vector<float> origin;
  std::vector<float> cell;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Volume preset: nuscenes | kitti360")
        ->check(CLI::IsMember({"nuscenes", "kitti360"}))
        ->capture_default_str();
    app->add_option("--dims", dims, "Voxel counts X,Y,Z")->delimiter(',');
    app->add_option("--origin", origin, "Minimum corner x,y,z in meters")->delimiter(',');
    app->add_option("--cell", cell, "Voxel edge lengths x,y,z in meters")->delimiter(',');
  }

  GridSpec resolve() const {
    GridSpec spec = preset == "kitti360" ? GridSpec::kitti360() : GridSpec::nuscenes();
    auto check3 = [](std::size_t n, const char* flag) {
      if (n != 0 && n != 3) throw UsageError(std::string(flag) + " expects three comma-separated values");
    };
    check3(dims.size(), "--dims");
    check3(origin.size(), "--origin");
    check3(cell.size(), "--cell");
    for (int a = 0; a < 3; ++a) {
      if (!dims.empty()) spec.dims[a] = dims[a];
      if (!origin.empty()) spec.origin[a] = origin[a];
      if (!cell.empty()) spec.cell_size[a] = cell[a];
    }
    try {
      spec.validate();
    } catch (const InvalidArgumentError& e) {
      throw UsageError(e.what());
    }
    return spec;
  }
};

// ---------------------------------------------------------------- splat

struct SplatArgs {
  std::string scene;
  std::string out;
  GridFlags grid;
  double cutoff = kDefaultCutoffSigma;
  bool exact = false;
  bool with_scores = false;
  int threads = 0;
};

int cmd_splat(const SplatArgs& a, std::ostream& out) {
  const GridSpec spec = a.grid.resolve();
  const GaussianScene scene = read_scene(a.scene);
  SplatOptions opts;
  opts.cutoff_sigma = a.exact ? kExactCutoff : a.cutoff;
  opts.threads = resolve_thread_count(a.threads);
  SplatStats stats;
  OccupancyGrid grid = splat(scene, spec, opts, &stats);
  if (!a.with_scores) {
    grid.scores.clear();
    grid.scores.shrink_to_fit();
  }
  write_grid(grid, a.out);

  std::uint64_t occupied = 0;
  for (const std::uint8_t l : grid.labels) occupied += l != kEmptyClass;
  out << "gaussians=" << scene.size() << "\n"
      << "voxels=" << grid.voxel_count() << "\n"
      << "pairs=" << stats.pair_count << "\n"
      << "occupied_voxels=" << occupied << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string truth;
  int empty_class = 0;
  int threads = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const OccupancyGrid pred = read_grid(a.pred);
  const OccupancyGrid truth = read_grid(a.truth);
  const ConfusionMatrix cm = confusion(pred, truth, resolve_thread_count(a.threads));
  const auto empty = static_cast<std::size_t>(a.empty_class);
  const IouResult iou = miou(cm, empty);
  const double sc = scene_completion_iou(cm, empty);

  out << "class        IoU\n";
  for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
    std::string name = std::to_string(c) + (c == empty ? " (empty)" : "");
    name.resize(12, ' ');
    out << name << " " << (iou.per_class[c] ? num(*iou.per_class[c]) : "undefined") << "\n";
  }
  out << "mIoU         " << num(iou.miou) << "\n"
      << "SC IoU       " << num(sc) << "\n\n";

  for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
    out << "iou." << c << "=" << (iou.per_class[c] ? num(*iou.per_class[c]) : "nan") << "\n";
  }
  out << "miou=" << num(iou.miou) << "\n"
      << "sc_iou=" << num(sc) << "\n"
      << "classes_averaged=" << iou.classes_averaged << "\n"
      << "ignored_voxels=" << cm.ignore_count() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string truth;
  std::string init;
  std::string init_mode = "uniform";
  std::size_t count = 0;
  double jitter = 0.5;
  std::string out;
  std::string log;
  bool log_timing = false;
  bool cosine = false;
  std::optional<double> cutoff;
  FitConfig config;
};

int cmd_fit(FitArgs a, std::ostream& out) {
  const OccupancyGrid truth = read_grid(a.truth);
  a.config.threads = resolve_thread_count(a.config.threads);
  a.config.cosine_schedule = a.cosine;
  if (a.cutoff) a.config.cutoff_sigma = *a.cutoff;
  try {
    a.config.validate();
  } catch (const InvalidArgumentError& e) {
    throw UsageError(e.what());
  }

  InitSpec init;
  init.class_count = truth.class_count;
  init.bounds = truth.spec;
  init.seed = a.config.seed;
  init.s_min = a.config.s_min;
  init.s_max = a.config.s_max;
  init.jitter = a.jitter;
  if (!a.init.empty()) {
    init.mode = InitMode::from_file;
    init.path = a.init;
  } else {
    init.mode = parse_init_mode(a.init_mode);
    if (init.mode == InitMode::from_file) throw UsageError("--init-mode from-file requires --init PATH");
    if (a.count == 0) throw UsageError("fit needs --init PATH or --count P");
    init.count = a.count;
  }
  const GaussianScene initial = init_scene(init);

  std::unique_ptr<std::ofstream> log;
  if (!a.log.empty()) {
    log = std::make_unique<std::ofstream>(a.log, std::ios::app);
    if (!*log) throw IoError("cannot open log '" + a.log + "'");
  }
  const FitReport report = fit(initial, truth, a.config, [&](const FitIteration& it) {
    if (!log) return;
    json rec = {{"iteration", it.iteration}, {"loss", it.loss},     {"ce_loss", it.ce_loss},
                {"lovasz_loss", it.lovasz_loss}, {"miou", it.miou}, {"sc_iou", it.sc_iou}};
    if (a.log_timing) rec["ms"] = it.milliseconds;
    *log << rec.dump() << "\n";
  });
  write_scene(report.final_scene, a.out);

  const FitIteration& first = report.iterations.front();
  const FitIteration& last = report.iterations.back();
  out << "gaussians=" << report.final_scene.size() << "\n"
      << "iterations=" << report.iterations.size() << "\n"
      << "initial_loss=" << num(first.loss) << "\n"
      << "final_loss=" << num(last.loss) << "\n"
      << "final_miou=" << num(last.miou) << "\n"
      << "final_sc_iou=" << num(last.sc_iou) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  GridFlags grid;
  int classes = 18;
  std::string shapes;
  std::size_t random_shapes = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string scene_out;
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
};

Vec3 vec3_of(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw InvalidArgumentError(std::string("shape field '") + key + "' must be a 3-array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::vector<Shape> load_shapes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open shapes file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgumentError("shapes file '" + path + "': " + e.what());
  }
  if (!doc.is_array()) throw InvalidArgumentError("shapes file must hold a JSON array");
  std::vector<Shape> shapes;
  try {
    for (const json& j : doc) {
      Shape s;
      const std::string kind = j.at("kind").get<std::string>();
      s.label = j.at("label").get<std::uint8_t>();
      if (kind == "box") {
        s.kind = ShapeKind::box;
        s.center = vec3_of(j, "center");
        s.half_extents = vec3_of(j, "half_extents");
        s.yaw = j.value("yaw", 0.0);
      } else if (kind == "sphere") {
        s.kind = ShapeKind::sphere;
        s.center = vec3_of(j, "center");
        s.radius = j.at("radius").get<double>();
      } else if (kind == "plane") {
        s.kind = ShapeKind::plane;
        s.center = vec3_of(j, "point");
        s.normal = vec3_of(j, "normal");
        s.thickness = j.at("thickness").get<double>();
      } else {
        throw InvalidArgumentError("unknown shape kind '" + kind + "'");
      }
      shapes.push_back(s);
    }
  } catch (const json::exception& e) {
    throw InvalidArgumentError(std::string("malformed shape: ") + e.what());
  }
  return shapes;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const GridSpec spec = a.grid.resolve();
  if (a.classes < 1 || a.classes > static_cast<int>(kMaxClassCount)) {
    throw UsageError("--classes must be in [1, 255]");
  }
  const auto classes = static_cast<std::size_t>(a.classes);
  std::vector<Shape> shapes;
  if (!a.shapes.empty()) shapes = load_shapes(a.shapes);
  if (a.random_shapes > 0) {
    const auto extra = random_shapes(spec, classes, a.random_shapes, a.seed);
    shapes.insert(shapes.end(), extra.begin(), extra.end());
  }
  SyntheticOptions opts;
  opts.emit_scene = !a.scene_out.empty();
  opts.s_min = a.s_min;
  opts.s_max = a.s_max;
  const SyntheticResult r = gen_synthetic(spec, classes, shapes, opts);
  write_grid(r.grid, a.out);
  if (r.scene) write_scene(*r.scene, a.scene_out);

  std::uint64_t occupied = 0;
  for (const std::uint8_t l : r.grid.labels) occupied += l != kEmptyClass;
  out << "shapes=" << shapes.size() << "\n"
      << "voxels=" << r.grid.voxel_count() << "\n"
      << "occupied_voxels=" << occupied << "\n";
  if (r.scene) out << "gaussians=" << r.scene->size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::vector<std::size_t> counts = kDefaultBenchCounts;
  int runs = 5;
  GridFlags grid;
  int classes = 18;
  double cutoff = kDefaultCutoffSigma;
  double s_min = kDefaultScaleMin;
  double s_max = kDefaultScaleMax;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  BenchConfig cfg;
  cfg.counts = a.counts;
  cfg.runs = a.runs;
  cfg.spec = a.grid.resolve();
  cfg.class_count = static_cast<std::size_t>(a.classes);
  cfg.cutoff_sigma = a.cutoff;
  cfg.s_min = a.s_min;
  cfg.s_max = a.s_max;
  cfg.seed = a.seed;
  cfg.threads = resolve_thread_count(a.threads);
  if (cfg.counts.empty()) throw UsageError("--counts needs at least one value");
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  const BenchResult r = run_splat_benchmark(cfg);

  out << "gaussians   median_ms      min_ms        pairs   peak_MiB\n";
  for (const BenchRow& row : r.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%9zu %11.3f %11.3f %12llu %10.2f\n", row.count, row.median_ms,
                  row.min_ms, static_cast<unsigned long long>(row.pairs),
                  static_cast<double>(row.peak_bytes) / (1024.0 * 1024.0));
    out << line;
  }
  out << "\n";
  for (const BenchRow& row : r.rows) {
    out << "latency_ms." << row.count << "=" << num(row.median_ms, 3) << "\n"
        << "peak_bytes." << row.count << "=" << row.peak_bytes << "\n";
  }
  out << "threads=" << cfg.threads << "\n";
  if (r.rows.size() >= 2) {
    out << "latency_slope_ms_per_gaussian=" << num(r.latency.slope, 9) << "\n"
        << "latency_intercept_ms=" << num(r.latency.intercept, 3) << "\n"
        << "latency_r2=" << num(r.latency.r2) << "\n"
        << "memory_slope_bytes_per_gaussian=" << num(r.memory.slope, 3) << "\n"
        << "memory_r2=" << num(r.memory.r2) << "\n"
        << "memory_max_relative_deviation=" << num(r.memory.max_relative_deviation) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- info

int cmd_info(const std::string& path, std::ostream& out) {
  const FileHeader header = read_header(path);
  if (const auto* s = std::get_if<SceneFileHeader>(&header)) {
    out << "format=SGAU\n"
        << "version=" << s->version << "\n"
        << "class_count=" << s->class_count << "\n"
        << "gaussian_count=" << s->gaussian_count << "\n"
        << "record_bytes=" << (10 + s->class_count) * 4 << "\n";
  } else {
    const auto& g = std::get<GridFileHeader>(header);
    out << "format=SVOX\n"
        << "version=" << g.version << "\n"
        << "class_count=" << g.class_count << "\n"
        << "dims=" << g.spec.dims[0] << "," << g.spec.dims[1] << "," << g.spec.dims[2] << "\n"
        << "origin=" << num(g.spec.origin[0]) << "," << num(g.spec.origin[1]) << "," << num(g.spec.origin[2]) << "\n"
        << "cell=" << num(g.spec.cell_size[0]) << "," << num(g.spec.cell_size[1]) << "," << num(g.spec.cell_size[2]) << "\n"
        << "payload_kind=" << static_cast<int>(g.payload) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic Gaussian scenes to voxel occupancy: splat, evaluate, fit, generate, benchmark",
               "gsocc"};
  app.require_subcommand(1);

  SplatArgs splat_args;
  auto* splat_cmd = app.add_subcommand("splat", "Splat a scene (.sgau) into an occupancy grid (.svox)");
  splat_cmd->add_option("--scene", splat_args.scene, "Input scene")->required();
  splat_cmd->add_option("--out", splat_args.out, "Output grid")->required();
  splat_args.grid.attach(splat_cmd);
  splat_cmd->add_option("--cutoff", splat_args.cutoff, "Neighborhood radius in standard deviations")
      ->capture_default_str();
  splat_cmd->add_flag("--exact", splat_args.exact, "Neighborhoods cover the whole grid");
  splat_cmd->add_flag("--with-scores", splat_args.with_scores, "Store per-class scores");
  splat_cmd->add_option("--threads", splat_args.threads, "Worker threads (default: GSOCC_THREADS or all cores)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class IoU, mIoU and scene-completion IoU");
  eval_cmd->add_option("--pred", eval_args.pred, "Predicted grid")->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Ground-truth grid")->required();
  eval_cmd->add_option("--empty-class", eval_args.empty_class, "Index of the empty class")
      ->check(CLI::Range(0, 254))
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval_args.threads, "Worker threads");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit Gaussians to a target grid");
  fit_cmd->add_option("--truth", fit_args.truth, "Target grid")->required();
  fit_cmd->add_option("--out", fit_args.out, "Output scene")->required();
  fit_cmd->add_option("--init", fit_args.init, "Initial scene (.sgau)");
  fit_cmd->add_option("--init-mode", fit_args.init_mode, "uniform | jittered-grid")
      ->check(CLI::IsMember({"uniform", "jittered-grid"}))
      ->capture_default_str();
  fit_cmd->add_option("--count", fit_args.count, "Gaussian count for generated initialization");
  fit_cmd->add_option("--jitter", fit_args.jitter, "Jitter fraction for jittered-grid")->capture_default_str();
  fit_cmd->add_option("--iterations", fit_args.config.iterations, "Refinement iterations B")->capture_default_str();
  fit_cmd->add_option("--lr", fit_args.config.learning_rate, "Learning rate")->capture_default_str();
  fit_cmd->add_option("--weight-decay", fit_args.config.weight_decay, "Decoupled weight decay")->capture_default_str();
  fit_cmd->add_option("--s-min", fit_args.config.s_min, "Minimum scale (m)")->capture_default_str();
  fit_cmd->add_option("--s-max", fit_args.config.s_max, "Maximum scale (m)")->capture_default_str();
  fit_cmd->add_option("--cutoff", fit_args.cutoff, "Neighborhood cutoff in sigmas (default: exact)");
  fit_cmd->add_option("--ce-weight", fit_args.config.loss_weights.ce, "Cross-entropy weight")->capture_default_str();
  fit_cmd->add_option("--lovasz-weight", fit_args.config.loss_weights.lovasz, "Lovasz-softmax weight")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.config.seed, "Seed for initialization")->capture_default_str();
  fit_cmd->add_flag("--cosine", fit_args.cosine, "Warmup + cosine learning-rate schedule");
  fit_cmd->add_option("--warmup", fit_args.config.warmup_iterations, "Warmup iterations for --cosine");
  fit_cmd->add_option("--log", fit_args.log, "Append per-iteration JSON lines to this file");
  fit_cmd->add_flag("--log-timing", fit_args.log_timing, "Include wall-clock ms in log records");
  fit_cmd->add_option("--threads", fit_args.config.threads, "Worker threads");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "Rasterize synthetic shapes into a labeled grid");
  gen_args.grid.attach(gen_cmd);
  gen_cmd->add_option("--classes", gen_args.classes, "Class count including empty")->capture_default_str();
  gen_cmd->add_option("--shapes", gen_args.shapes, "JSON array of box/sphere/plane shapes");
  gen_cmd->add_option("--random-shapes", gen_args.random_shapes, "Append N random shapes");
  gen_cmd->add_option("--seed", gen_args.seed, "Seed for random shapes")->capture_default_str();
  gen_cmd->add_option("--out", gen_args.out, "Output grid")->required();
  gen_cmd->add_option("--scene-out", gen_args.scene_out, "Also write a generating scene");
  gen_cmd->add_option("--s-min", gen_args.s_min, "Minimum scale of emitted Gaussians")->capture_default_str();
  gen_cmd->add_option("--s-max", gen_args.s_max, "Maximum scale of emitted Gaussians")->capture_default_str();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Splatting latency vs Gaussian count");
  bench_cmd->add_option("--counts", bench_args.counts, "Gaussian counts")->delimiter(',');
  bench_cmd->add_option("--runs", bench_args.runs, "Timed runs per count")->capture_default_str();
  bench_args.grid.attach(bench_cmd);
  bench_cmd->add_option("--classes", bench_args.classes, "Class count")->check(CLI::Range(1, 255))->capture_default_str();
  bench_cmd->add_option("--cutoff", bench_args.cutoff, "Neighborhood cutoff in sigmas")->capture_default_str();
  bench_cmd->add_option("--s-min", bench_args.s_min, "Minimum random scale")->capture_default_str();
  bench_cmd->add_option("--s-max", bench_args.s_max, "Maximum random scale")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "Scene seed")->capture_default_str();
  bench_cmd->add_option("--threads", bench_args.threads, "Worker threads");

  std::string info_path;
  auto* info_cmd = app.add_subcommand("info", "Print the header of a .sgau or .svox file");
  info_cmd->add_option("file", info_path, "Scene or grid file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*splat_cmd) return cmd_splat(splat_args, out);
    if (*eval_cmd) return cmd_eval(eval_args, out);
    if (*fit_cmd) return cmd_fit(fit_args, out);
    if (*gen_cmd) return cmd_gen(gen_args, out);
    if (*bench_cmd) return cmd_bench(bench_args, out);
    if (*info_cmd) return cmd_info(info_path, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("gsocc");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data(), out, err);
}

}  // namespace gsocc::cli
