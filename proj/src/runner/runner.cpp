#include <rfl/runner/runner.hpp>

#include <rfl/selection.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <Eigen/Core>

namespace rfl::runner {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("RFL_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

std::vector<std::string> main_columns(Scenario s) {
  switch (s) {
    case Scenario::oracle_validation: return columns::oracle;
    case Scenario::fl_training: return columns::fl;
    default: return columns::selection;
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ChannelSet task_channels(const ExperimentConfig& cfg, double eps, std::uint64_t seed) {
  GeometryConfig geom = cfg.base.geometry;
  geom.seed = seed;
  const int K = cfg.base.num_devices;
  return generate_channels(K, cfg.base.num_antennas, geom, std::vector<double>(static_cast<std::size_t>(K), eps),
                           cfg.base.noise_dl, cfg.base.noise_ul);
}

DbConventions point_db(const ExperimentConfig& cfg, const GridPoint& p) {
  DbConventions db = cfg.base.db;
  db.gamma_b_db = p.gamma_b_db;
  db.gamma_d_db = p.gamma_d_db;
  return db;
}

conic::SolverSettings solver_settings(const ExperimentConfig& cfg) {
  conic::SolverSettings s;
  s.tol = cfg.selection.solver_tol;
  s.max_iterations = cfg.selection.solver_max_iterations;
  return s;
}

SelectionConfig selection_config(const ExperimentConfig& cfg, const GridPoint& p, const ChannelSet& ch,
                                 std::uint64_t seed) {
  SelectionConfig sc = make_selection_config(point_db(cfg, p), ch);
  sc.nu1 = cfg.selection.nu1;
  sc.nu2 = cfg.selection.nu2;
  sc.max_ao_iters = cfg.selection.max_ao_iters;
  sc.force_lmi = cfg.selection.force_lmi;
  sc.binary_search = cfg.selection.binary_search;
  sc.solver = solver_settings(cfg);
  sc.seed = seed;
  return sc;
}

std::vector<std::string> prefix(const std::string& hash, const ExperimentConfig& cfg, const GridPoint& p,
                                int r, std::uint64_t seed) {
  return {hash, to_string(cfg.scenario), fmt(p.index), fmt(p.gamma_b_db), fmt(p.gamma_d_db), fmt(p.epsilon),
          fmt(r), std::to_string(seed)};
}

TaskRows selection_task(const ExperimentConfig& cfg, const std::string& hash, const GridPoint& p, int r) {
  const auto t0 = Clock::now();
  const std::uint64_t seed = realization_seed(cfg, r);
  const ChannelSet ch = task_channels(cfg, p.epsilon, seed);
  const SelectionConfig sc = selection_config(cfg, p, ch, seed);
  TaskRows out;
  auto row = prefix(hash, cfg, p, r, seed);
  try {
    const SelectionOutcome o = select_devices(ch, sc);
    double dmax = 0.0;
    for (int k : o.selected) dmax = std::max(dmax, o.achieved.downlink[static_cast<std::size_t>(k)]);
    row.insert(row.end(), {"ok", fmt(o.m_final), join_ints(o.selected), fmt(o.chi.sum()),
                           fmt(static_cast<int>(o.sparsity_trace.values.size())),
                           fmt_bool(o.sparsity_trace.converged),
                           fmt(static_cast<int>(o.feasibility_trace.size())), fmt(o.objective),
                           fmt(o.achieved.uplink), fmt(dmax)});
    if (cfg.scenario == Scenario::sparsity_convergence) {
      const auto& v = o.sparsity_trace.values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto t = prefix(hash, cfg, p, r, seed);
        t.push_back(fmt(static_cast<int>(i + 1)));
        t.push_back(fmt(v[i]));
        out.trace.push_back(std::move(t));
      }
    }
  } catch (const SubproblemFailure& e) {
    const std::string nan = fmt(std::nan(""));
    row.insert(row.end(), {"solver_failure", "0", "", nan, fmt(e.iteration + 1), "0", "0", nan, nan, nan});
  }
  row.push_back(fmt(seconds_since(t0)));
  out.main.push_back(std::move(row));
  return out;
}

TaskRows oracle_task(const ExperimentConfig& cfg, const std::string& hash, const GridPoint& p, int r) {
  const auto t0 = Clock::now();
  const std::uint64_t seed = realization_seed(cfg, r);
  const ChannelSet ch = task_channels(cfg, p.epsilon, seed);
  const SelectionConfig sc = selection_config(cfg, p, ch, seed);
  auto row = prefix(hash, cfg, p, r, seed);
  try {
    const SelectionOutcome o = select_devices(ch, sc);
    const OracleResult orc = exhaustive_oracle(ch, sc);
    row.insert(row.end(), {"ok", fmt(o.m_final), fmt(orc.max_size), fmt_bool(orc.max_size - o.m_final <= 1),
                           fmt_bool(o.m_final > orc.max_size)});
  } catch (const SubproblemFailure&) {
    row.insert(row.end(), {"solver_failure", "0", "0", "0", "0"});
  }
  row.push_back(fmt(seconds_since(t0)));
  TaskRows out;
  out.main.push_back(std::move(row));
  return out;
}

struct MnistData {
  fl::Dataset train;
  fl::Dataset test;
};

// Loaded once per (dir, limits) and shared read-only between tasks.
std::shared_ptr<const MnistData> mnist(const std::string& dir, int train_limit, int test_limit) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const MnistData>> cache;
  const std::string key = dir + "|" + std::to_string(train_limit) + "|" + std::to_string(test_limit);
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto d = std::make_shared<MnistData>();
  const fs::path base(dir);
  d->train = fl::load_idx((base / "train-images-idx3-ubyte").string(), (base / "train-labels-idx1-ubyte").string(),
                          train_limit);
  d->test = fl::load_idx((base / "t10k-images-idx3-ubyte").string(), (base / "t10k-labels-idx1-ubyte").string(),
                         test_limit);
  cache.emplace(key, d);
  return d;
}

TaskRows fl_task(const ExperimentConfig& cfg, const std::string& hash, const GridPoint& p, int r) {
  const auto t0 = Clock::now();
  const std::uint64_t seed = realization_seed(cfg, r);
  const auto& F = cfg.fl;
  const int K = cfg.base.num_devices;

  // Data, partition and channels depend on the realization only, so designs
  // at the same realization are compared on identical tasks.
  fl::Dataset train;
  fl::Dataset test;
  std::shared_ptr<const MnistData> shared;
  const fl::Dataset* train_ptr = &train;
  const fl::Dataset* test_ptr = &test;
  if (F.train.dataset == fl::DatasetKind::synthetic_blobs) {
    const std::uint64_t centres = mix_seed(seed, 20);
    train = fl::make_synthetic_blobs(F.samples, F.features, F.classes, F.separation, centres, mix_seed(seed, 21));
    test = fl::make_synthetic_blobs(F.test_samples, F.features, F.classes, F.separation, centres, mix_seed(seed, 22));
  } else {
    const bool full = F.train.dataset == fl::DatasetKind::mnist_full;
    shared = mnist(F.mnist_dir, full ? 0 : F.mnist_train_limit, full ? 0 : F.mnist_test_limit);
    train_ptr = &shared->train;
    test_ptr = &shared->test;
  }
  const fl::PartitionResult parts = fl::partition_dataset(*train_ptr, K, F.train.partition, mix_seed(seed, 23));
  const auto model = fl::make_model(F.train.model, train_ptr->num_features(), train_ptr->num_classes, F.train.hidden);

  fl::FlConfig fc = F.train;
  fc.num_devices = K;
  fc.seed = mix_seed(seed, 24);

  std::vector<int> all(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) all[static_cast<std::size_t>(k)] = k;
  fl::Planner planner;
  if (p.design == "ideal" || p.design == "manual") {
    fl::DistortionSpec spec;
    const bool manual = p.design == "manual";
    spec.broadcast.assign(static_cast<std::size_t>(K), manual ? F.manual_broadcast_var : 0.0);
    spec.aggregation = manual ? F.manual_aggregation_var : 0.0;
    planner = fl::fixed_planner(all, spec);
  } else {
    fl::SelectionPlannerConfig pc;
    pc.num_antennas = cfg.base.num_antennas;
    pc.geometry = cfg.base.geometry;
    pc.db = point_db(cfg, p);
    pc.true_radius = F.true_epsilon >= 0.0 ? F.true_epsilon : p.epsilon;
    pc.design_radius = p.design == "robust" ? p.epsilon : 0.0;
    pc.realized = F.realized_distortion;
    pc.noise_dl = cfg.base.noise_dl;
    pc.noise_ul = cfg.base.noise_ul;
    pc.nu1 = cfg.selection.nu1;
    pc.nu2 = cfg.selection.nu2;
    pc.max_ao_iters = cfg.selection.max_ao_iters;
    pc.force_lmi = cfg.selection.force_lmi;
    pc.binary_search = cfg.selection.binary_search;
    pc.solver = solver_settings(cfg);
    pc.seed = mix_seed(seed, 25);
    planner = fl::selection_planner(K, pc);
  }

  const fl::FlResult res = fl::run_federated_training(fc, *model, parts.shards, *train_ptr, *test_ptr, planner);
  const std::string wall = fmt(seconds_since(t0));
  TaskRows out;
  for (const auto& m : res.rounds) {
    std::vector<std::string> row{hash,
                                 to_string(cfg.scenario),
                                 fmt(p.index),
                                 p.design,
                                 fmt(p.gamma_b_db),
                                 fmt(p.gamma_d_db),
                                 fmt(p.epsilon),
                                 fmt(r),
                                 std::to_string(seed),
                                 "ok",
                                 fmt(m.round),
                                 fmt(m.train_loss),
                                 fmt(m.test_loss),
                                 fmt(m.test_accuracy),
                                 fmt(m.num_selected),
                                 fmt(m.mse_bs),
                                 fmt(m.mse_device_mean),
                                 fmt_bool(m.skipped),
                                 wall};
    out.main.push_back(std::move(row));
  }
  return out;
}

// Per grid point and iteration; traces that stopped early hold their final
// value.
Table mean_traces(const Table& trace, const std::vector<GridPoint>& points, int realizations,
                  const std::string& hash, Scenario scen) {
  const int pc = trace.column("point");
  const int rc = trace.column("realization");
  const int vc = trace.column("chi_l1");
  std::vector<std::vector<std::vector<double>>> per(points.size(),
                                                    std::vector<std::vector<double>>(static_cast<std::size_t>(realizations)));
  for (const auto& row : trace.rows) {
    const auto p = static_cast<std::size_t>(std::stoi(row[static_cast<std::size_t>(pc)]));
    const auto r = static_cast<std::size_t>(std::stoi(row[static_cast<std::size_t>(rc)]));
    per[p][r].push_back(std::stod(row[static_cast<std::size_t>(vc)]));
  }
  Table out;
  out.header = columns::trace_mean;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::size_t len = 0;
    for (const auto& v : per[p]) len = std::max(len, v.size());
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> xs;
      for (const auto& v : per[p])
        if (!v.empty()) xs.push_back(i < v.size() ? v[i] : v.back());
      const auto n = static_cast<double>(xs.size());
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= n;
      double se = 0.0;
      if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (n - 1.0) / n);
      }
      const GridPoint& g = points[p];
      out.rows.push_back({hash, to_string(scen), fmt(g.index), fmt(g.gamma_b_db), fmt(g.gamma_d_db),
                          fmt(g.epsilon), fmt(static_cast<int>(i + 1)), std::to_string(xs.size()), fmt(mean),
                          fmt(se)});
    }
  }
  return out;
}

TaskRows dispatch(const ExperimentConfig& cfg, const std::string& hash, const GridPoint& p, int r) {
  switch (cfg.scenario) {
    case Scenario::oracle_validation: return oracle_task(cfg, hash, p, r);
    case Scenario::fl_training: return fl_task(cfg, hash, p, r);
    default: return selection_task(cfg, hash, p, r);
  }
}

}  // namespace

TaskRows run_task(const ExperimentConfig& cfg, const GridPoint& point, int realization) {
  return dispatch(cfg, config_hash(cfg), point, realization);
}

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto t0 = Clock::now();
  RunReport rep;
  rep.config_hash = config_hash(cfg);
  rep.output_dir = resolve_output_dir(cfg, opt.output_dir);
  fs::create_directories(rep.output_dir);

  const std::vector<GridPoint> points = expand_grid(cfg);
  const int R = cfg.num_realizations;
  const int n = static_cast<int>(points.size()) * R;
  rep.tasks = n;

  struct Slot {
    bool done = false;
    TaskRows rows;
    std::string error;
    double seconds = 0.0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(n));
  std::mutex collector;
  std::atomic<int> next{0};
  int finished = 0;

  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      const GridPoint& p = points[static_cast<std::size_t>(i / R)];
      const int r = i % R;
      const auto ts = Clock::now();
      Slot s;
      try {
        s.rows = dispatch(cfg, rep.config_hash, p, r);
        s.done = true;
      } catch (const std::exception& e) {
        s.error = e.what();
      }
      s.seconds = seconds_since(ts);
      std::lock_guard lock(collector);
      ++finished;
      if (opt.progress)
        std::clog << "[" << finished << "/" << n << "] point " << p.index << " realization " << r << ": "
                  << (s.done ? "ok" : "FAILED (" + s.error + ")") << " " << s.seconds << " s\n";
      slots[static_cast<std::size_t>(i)] = std::move(s);
    }
  };
  const int jobs = std::max(1, std::min(opt.jobs, n));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Table main;
  main.header = main_columns(cfg.scenario);
  Table trace;
  trace.header = columns::trace;
  json failures = json::array();
  double task_seconds = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& s = slots[static_cast<std::size_t>(i)];
    task_seconds += s.seconds;
    if (!s.done) {
      ++rep.failed;
      failures.push_back({{"point", i / R},
                          {"realization", i % R},
                          {"seed", realization_seed(cfg, i % R)},
                          {"error", s.error}});
      continue;
    }
    for (auto& row : s.rows.main) main.rows.push_back(std::move(row));
    for (auto& row : s.rows.trace) trace.rows.push_back(std::move(row));
  }

  const std::string scen = to_string(cfg.scenario);
  const fs::path dir(rep.output_dir);
  const std::string main_path = (dir / (scen + ".csv")).string();
  write_csv_file(main_path, main);
  rep.files.push_back(main_path);
  if (cfg.scenario == Scenario::sparsity_convergence) {
    const std::string tp = (dir / (scen + "_trace.csv")).string();
    write_csv_file(tp, trace);
    rep.files.push_back(tp);
    const std::string mp = (dir / (scen + "_trace_mean.csv")).string();
    write_csv_file(mp, mean_traces(trace, points, R, rep.config_hash, cfg.scenario));
    rep.files.push_back(mp);
  }
  rep.wall_time_s = seconds_since(t0);

  json man;
  man["status"] = rep.failed == 0 ? "complete" : "partial";
  man["config_hash"] = rep.config_hash;
  man["config"] = canonical_json(cfg);
  man["scenario"] = scen;
  man["grid_points"] = points.size();
  man["realizations"] = R;
  man["tasks"] = n;
  man["tasks_failed"] = rep.failed;
  man["failures"] = failures;
  man["rows"] = main.rows.size();
  man["files"] = rep.files;
  man["jobs"] = jobs;
  man["timing"] = {{"wall_time_s", rep.wall_time_s}, {"task_time_s", task_seconds}};
  man["versions"] = {{"rfl", "0.1.0"},
                     {"compiler", __VERSION__},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  rep.manifest = (dir / "manifest.json").string();
  std::ofstream(rep.manifest) << man.dump(2) << '\n';
  return rep;
}

Table replay(const ExperimentConfig& cfg, std::uint64_t seed, int point) {
  const std::vector<GridPoint> points = expand_grid(cfg);
  if (point < 0 || point >= static_cast<int>(points.size()))
    throw ConfigError("grid point " + std::to_string(point) + " out of range (0.." +
                      std::to_string(points.size() - 1) + ")");
  int r = -1;
  for (int i = 0; i < cfg.num_realizations; ++i)
    if (realization_seed(cfg, i) == seed) {
      r = i;
      break;
    }
  if (r < 0) throw ConfigError("seed " + std::to_string(seed) + " is not a realization seed of this config");
  Table t;
  t.header = main_columns(cfg.scenario);
  t.rows = run_task(cfg, points[static_cast<std::size_t>(point)], r).main;
  return t;
}

}  // namespace rfl::runner
