// Acceptance checks. Usage: rfl_acceptance [criterion...]; all ten run when
// none are given. Prints one PASS/FAIL line per criterion and exits nonzero
// if any failed.

#include <rfl/channel_model.hpp>
#include <rfl/fl/data.hpp>
#include <rfl/fl/model.hpp>
#include <rfl/fl/simulator.hpp>
#include <rfl/mse_metrics.hpp>
#include <rfl/runner/config.hpp>
#include <rfl/runner/csv.hpp>
#include <rfl/runner/runner.hpp>
#include <rfl/selection.hpp>

#include <test_support.hpp>

#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rfl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ChannelSet desk_channels(int K, int N, double eps, std::uint64_t seed) {
  GeometryConfig g;
  g.seed = seed;
  return generate_channels(K, N, g, std::vector<double>(K, eps));
}

bool nonincreasing(const std::vector<double>& v, double tol) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + tol) return false;
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rfl_acceptance_" + std::to_string(getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

runner::RunReport run(const json& j, const fs::path& dir) {
  runner::RunOptions opt;
  opt.output_dir = dir.string();
  opt.progress = false;
  return runner::run_experiment(runner::parse_config(j.dump()), opt);
}

// ---------------------------------------------------------------------------

Outcome s_procedure_soundness() {
  int feasible = 0;
  int unsound = 0;
  int violated = 0;
  int unsolved = 0;
  double worst_feasible = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 200; ++s) {
    const auto t = testing::robust_quadratic_trial(mix_seed(1, s), 10000);
    if (!t.solved) {
      ++unsolved;
      continue;
    }
    if (t.lmi_feasible) {
      ++feasible;
      worst_feasible = std::min(worst_feasible, t.sampled_min_eig);
      if (t.sampled_min_eig < -1e-7) ++unsound;
    }
    violated += t.sampled_min_eig < -1e-7;
  }
  Outcome o;
  // A sampled violation on a feasible instance breaks both directions at once.
  o.pass = unsound == 0 && unsolved == 0;
  o.detail = format("%d/200 LMI feasible (min sampled eig %.3g), %d sampled violations all on infeasible LMIs: %s, "
                    "%d unsolved",
                    feasible, worst_feasible, violated, unsound == 0 ? "yes" : "no", unsolved);
  return o;
}

Outcome worst_case_closed_forms() {
  Rng rng(2);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> devs(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double dl_excess = -1e300;
  double ul_excess = -1e300;
  double witness_gap = 0.0;
  double nominal_gap = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = dim(rng);
    const double noise = 0.1 + u(rng);
    const double eps = 0.05 + 0.5 * u(rng);

    const cplx v(u(rng) - 0.5, u(rng) - 0.5);
    const CVec w = testing::random_cvec(n, rng);
    const CVec h = testing::random_cvec(n, rng);
    const double dl = worst_case_downlink_mse(v, w, h, eps, noise);
    double dl_max = -1e300;
    for (int i = 0; i < 10000; ++i)
      dl_max = std::max(dl_max, downlink_mse(v, w, h + testing::ball_point(n, eps, rng, true), noise));
    dl_excess = std::max(dl_excess, (dl_max - dl) / std::max(1.0, dl));
    witness_gap = std::max(witness_gap, std::abs(downlink_mse(v, w, h + aligned_downlink_error(v, w, h, eps), noise) - dl));
    nominal_gap = std::max(nominal_gap, std::abs(worst_case_downlink_mse(v, w, h, 0.0, noise) - downlink_mse(v, w, h, noise)));

    const int k = devs(rng);
    const CVec z = testing::random_cvec(n, rng);
    std::vector<cplx> b;
    std::vector<CVec> hs;
    std::vector<double> radii;
    for (int d = 0; d < k; ++d) {
      b.emplace_back(u(rng) - 0.5, u(rng) - 0.5);
      hs.push_back(testing::random_cvec(n, rng));
      radii.push_back(0.05 + 0.5 * u(rng));
    }
    const double ul = worst_case_uplink_mse(z, b, hs, radii, noise);
    double ul_max = -1e300;
    std::vector<CVec> hp(hs.size());
    for (int i = 0; i < 10000; ++i) {
      for (int d = 0; d < k; ++d) hp[d] = hs[d] + testing::ball_point(n, radii[d], rng, true);
      ul_max = std::max(ul_max, uplink_mse(z, b, hp, noise));
    }
    ul_excess = std::max(ul_excess, (ul_max - ul) / std::max(1.0, ul));
    for (int d = 0; d < k; ++d) hp[d] = hs[d] + aligned_uplink_error(z, b[d], hs[d], radii[d]);
    witness_gap = std::max(witness_gap, std::abs(uplink_mse(z, b, hp, noise) - ul));
    nominal_gap = std::max(nominal_gap, std::abs(worst_case_uplink_mse(z, b, hs, std::vector<double>(k, 0.0), noise) -
                                                 uplink_mse(z, b, hs, noise)));
  }
  Outcome o;
  // Sampled maxima may touch the closed form up to rounding.
  o.pass = dl_excess <= 1e-12 && ul_excess <= 1e-12 && witness_gap <= 1e-9 && nominal_gap <= 1e-12;
  o.detail = format("sampled-minus-closed max (rel) dl %.3g ul %.3g, witness gap %.3g, eps=0 gap %.3g", dl_excess,
                    ul_excess, witness_gap, nominal_gap);
  return o;
}

Outcome ao_monotonicity() {
  int mono = 0;
  int fast = 0;
  int sparse_fast = 0;
  int iters = 0;
  for (int s = 0; s < 20; ++s) {
    const ChannelSet ch = desk_channels(6, 8, 0.1, mix_seed(3, 1000 + s));
    const SelectionConfig cfg = make_selection_config(DbConventions{}, ch);
    const SelectionOutcome out = select_devices(ch, cfg);
    const double tol = 10 * cfg.solver.tol;
    bool ok = nonincreasing(out.sparsity_trace.values, tol);
    bool conv = out.sparsity_trace.converged && out.sparsity_trace.values.size() <= 20;
    iters += static_cast<int>(out.sparsity_trace.values.size());
    sparse_fast += conv;
    for (const auto& a : out.feasibility_trace) {
      ok = ok && nonincreasing(a.trace.values, tol);
      if (a.failure.empty()) conv = conv && a.trace.converged && a.trace.values.size() <= 20;
    }
    mono += ok;
    fast += conv;
  }
  Outcome o;
  o.pass = mono == 20 && fast >= 18;
  // Both stages count: an instance converges when the sparsity run and every
  // feasibility run that did not break down settle within 20 iterations.
  o.detail = format("monotone %d/20, converged within 20 iterations %d/20 (sparsity stage alone %d/20), mean sparsity "
                    "iterations %.1f",
                    mono, fast, sparse_fast, iters / 20.0);
  return o;
}

Outcome output_feasibility() {
  int checked = 0;
  int violations = 0;
  int skipped = 0;
  double worst_ul = -1e300;
  double worst_dl = -1e300;
  const std::vector<std::pair<int, int>> sizes{{4, 4}, {6, 8}};
  for (const auto& [K, N] : sizes)
    for (double eps : {0.0, 0.1, 0.2})
      for (double gb : {0.0, 5.0, 10.0})
        for (int s = 0; s < 2; ++s) {
          const ChannelSet ch = desk_channels(K, N, eps, mix_seed(4, 100 * K + s));
          DbConventions db;
          db.gamma_b_db = gb;
          const SelectionConfig cfg = make_selection_config(db, ch);
          const SelectionOutcome out = select_devices(ch, cfg);
          if (out.selected.empty() || out.feasibility_trace.empty() ||
              !out.feasibility_trace.back().trace.converged) {
            ++skipped;
            continue;
          }
          ++checked;
          const MseReport r = evaluate_mse(ch, out.transceivers, out.selected);
          bool ok = r.uplink <= cfg.gamma_b + 1e-6;
          worst_ul = std::max(worst_ul, r.uplink - cfg.gamma_b);
          for (int k : out.selected) {
            ok = ok && r.downlink[k] <= cfg.gamma_d[k] + 1e-6;
            worst_dl = std::max(worst_dl, r.downlink[k] - cfg.gamma_d[k]);
          }
          violations += !ok;
        }
  Outcome o;
  o.pass = violations == 0 && checked > 0;
  o.detail = format("%d selections checked (%d empty or unconverged), %d violations, max excess uplink %.3g downlink %.3g",
                    checked, skipped, violations, worst_ul, worst_dl);
  return o;
}

Outcome oracle_near_optimality() {
  int within = 0;
  int exceeds = 0;
  std::string gaps;
  for (int s = 0; s < 20; ++s) {
    const ChannelSet ch = desk_channels(4, 4, 0.1, mix_seed(5, s));
    const SelectionConfig cfg = make_selection_config(DbConventions{}, ch);
    const SelectionOutcome out = select_devices(ch, cfg);
    const OracleResult orc = exhaustive_oracle(ch, cfg);
    within += orc.max_size - out.m_final <= 1 && out.m_final <= orc.max_size;
    exceeds += out.m_final > orc.max_size;
    gaps += std::to_string(orc.max_size - out.m_final);
  }
  Outcome o;
  o.pass = within >= 16 && exceeds == 0;
  o.detail = format("within one %d/20, exceeds %d, oracle minus m_final per seed %s", within, exceeds, gaps.c_str());
  return o;
}

struct PointStats {
  double value = 0.0;
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

// Mean and standard error (sample sd / sqrt(n)) of num_selected per grid
// value, over rows with status ok.
std::vector<PointStats> selection_stats(const std::string& csv, const std::string& axis, int* failures) {
  const runner::Table t = runner::read_csv_file(csv);
  const int ca = t.column(axis);
  const int cs = t.column("status");
  const int cn = t.column("num_selected");
  std::map<double, std::vector<double>> by;
  for (const auto& r : t.rows) {
    if (r[cs] != "ok") {
      ++*failures;
      continue;
    }
    by[std::stod(r[ca])].push_back(std::stod(r[cn]));
  }
  std::vector<PointStats> out;
  for (const auto& [x, v] : by) {
    PointStats p;
    p.value = x;
    p.n = static_cast<int>(v.size());
    p.mean = std::accumulate(v.begin(), v.end(), 0.0) / p.n;
    double ss = 0.0;
    for (double y : v) ss += (y - p.mean) * (y - p.mean);
    p.se = p.n > 1 ? std::sqrt(ss / (p.n - 1) / p.n) : 0.0;
    out.push_back(p);
  }
  return out;
}

// Adjacent steps against the direction (+1 nondecreasing, -1 nonincreasing)
// beyond the larger of the two standard errors.
int trend_violations(const std::vector<PointStats>& p, int direction, std::string* text) {
  int bad = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    *text += format("%s%g:%.2f±%.2f", i ? " " : "", p[i].value, p[i].mean, p[i].se);
    if (i == 0) continue;
    const double drop = direction * (p[i - 1].mean - p[i].mean);
    if (drop > std::max(p[i - 1].se, p[i].se)) ++bad;
  }
  return bad;
}

Outcome trends() {
  const fs::path dir = scratch("trends");
  const json gamma{{"scenario", "selection_vs_gamma"},
                   {"profile", "desk"},
                   {"seed", 6},
                   {"num_realizations", 20},
                   {"grid", {{"gamma_b_db", {-5, 0, 5, 10}}}}};
  const json eps{{"scenario", "selection_vs_epsilon"},
                 {"profile", "desk"},
                 {"seed", 6},
                 {"num_realizations", 20},
                 {"grid", {{"epsilon", {0, 0.05, 0.1, 0.2}}}}};
  const auto rg = run(gamma, dir / "gamma");
  const auto re = run(eps, dir / "epsilon");
  int failures = rg.failed + re.failed;
  int row_failures = 0;
  std::string tg;
  std::string te;
  const int vg = trend_violations(selection_stats(rg.files.at(0), "gamma_b_db", &row_failures), 1, &tg);
  const int ve = trend_violations(selection_stats(re.files.at(0), "epsilon", &row_failures), -1, &te);
  fs::remove_all(dir);
  Outcome o;
  o.pass = vg == 0 && ve == 0 && failures == 0;
  o.detail = format("mean |S| vs gamma_b_db [%s], vs epsilon [%s], violations %d/%d, solver failures %d", tg.c_str(),
                    te.c_str(), vg, ve, row_failures + failures);
  return o;
}

Outcome zero_radius_equivalence() {
  int same = 0;
  int same_set = 0;
  double gap = 0.0;
  for (int s = 0; s < 20; ++s) {
    const ChannelSet ch = desk_channels(6, 8, 0.0, mix_seed(7, s));
    SelectionConfig direct = make_selection_config(DbConventions{}, ch);
    SelectionConfig robust = direct;
    robust.force_lmi = true;
    const SelectionOutcome a = select_devices(ch, direct);
    const SelectionOutcome b = select_devices(ch, robust);
    const double d = std::abs(a.objective - b.objective);
    gap = std::max(gap, d);
    same_set += a.selected == b.selected;
    same += a.selected == b.selected && d <= 1e-5;
  }
  Outcome o;
  o.pass = same == 20;
  o.detail = format("%d/20 seeds agree (identical sets %d/20), max objective gap %.3g", same, same_set, gap);
  return o;
}

double fd_error(const fl::Model& m, const fl::Dataset& d, std::uint64_t seed, int coords) {
  RVec q = m.initial_params(seed);
  Rng rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.1);
  for (Eigen::Index i = 0; i < q.size(); ++i) q(i) += g(rng);
  RVec grad;
  m.loss_grad(q, d.x, d.y, &grad);
  std::uniform_int_distribution<Eigen::Index> pick(0, q.size() - 1);
  double num = 0.0;
  double den = 0.0;
  const double h = 1e-6;
  for (int c = 0; c < coords; ++c) {
    const Eigen::Index i = coords >= q.size() ? c : pick(rng);
    if (i >= q.size()) break;
    RVec qp = q;
    RVec qm = q;
    qp(i) += h;
    qm(i) -= h;
    const double fd = (m.loss_grad(qp, d.x, d.y, nullptr) - m.loss_grad(qm, d.x, d.y, nullptr)) / (2 * h);
    num += (fd - grad(i)) * (fd - grad(i));
    den += std::max(fd * fd, grad(i) * grad(i));
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

fl::Dataset gaussian_data(int n, int features, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> lab(0, classes - 1);
  fl::Dataset d;
  d.x.resize(n, features);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < features; ++j) d.x(i, j) = g(rng);
  for (int i = 0; i < n; ++i) d.y.push_back(lab(rng));
  d.num_classes = classes;
  return d;
}

// Softmax regression gradient, parameters laid out as W (classes x features)
// row-major followed by the biases.
RVec plain_logistic_grad(const RVec& q, const fl::Dataset& d) {
  const int f = d.num_features();
  const int c = d.num_classes;
  RVec g = RVec::Zero(q.size());
  for (int i = 0; i < d.size(); ++i) {
    std::vector<double> z(static_cast<std::size_t>(c));
    for (int a = 0; a < c; ++a) {
      z[a] = q(c * f + a);
      for (int j = 0; j < f; ++j) z[a] += q(a * f + j) * d.x(i, j);
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& v : z) s += (v = std::exp(v - mx));
    for (int a = 0; a < c; ++a) {
      const double r = z[a] / s - (d.y[i] == a ? 1.0 : 0.0);
      for (int j = 0; j < f; ++j) g(a * f + j) += r * d.x(i, j);
      g(c * f + a) += r;
    }
  }
  return g / d.size();
}

double residual_variance(const RVec& noisy, const RVec& clean, double scale) {
  const RVec r = (noisy - clean) / scale;
  const double mu = r.mean();
  return (r.array() - mu).square().sum() / static_cast<double>(r.size() - 1);
}

Outcome fl_correctness() {
  using namespace rfl::fl;
  double fd = 0.0;
  fd = std::max(fd, fd_error(*make_model(ModelKind::logistic, 6, 4), gaussian_data(25, 6, 4, 11), 3, 1000));
  fd = std::max(fd, fd_error(*make_model(ModelKind::small_mlp, 6, 3, 8), gaussian_data(25, 6, 3, 12), 4, 1000));

  const Dataset train = make_synthetic_blobs(300, 5, 3, 2.0, 51, 52);
  const PartitionResult p = partition_dataset(train, 3, Partition::non_iid, 54);
  FlConfig cfg;
  cfg.num_devices = 3;
  cfg.rounds = 6;
  cfg.learning_rate = 0.3;
  cfg.batch_size = 1000;
  const auto lm = make_model(ModelKind::logistic, 5, 3);
  const FlResult r = run_federated_training(cfg, *lm, p.shards, train, train, fixed_planner({0, 1, 2}, {}));
  RVec q = lm->initial_params(0);
  double total = 0.0;
  for (const auto& s : p.shards) total += s.size();
  for (int t = 0; t < cfg.rounds; ++t) {
    RVec next = RVec::Zero(q.size());
    for (const auto& s : p.shards) next += (s.size() / total) * (q - cfg.learning_rate * plain_logistic_grad(q, s));
    q = next;
  }
  const double fedavg = (r.final_params - q).cwiseAbs().maxCoeff();

  Rng rng(8);
  std::normal_distribution<double> g(2.0, 3.0);
  RVec base(100000);
  for (Eigen::Index i = 0; i < base.size(); ++i) base(i) = g(rng);
  DistortionSpec spec;
  spec.broadcast = {0.3};
  const double scale = norm_stats(base).scale;
  const double bvar = residual_variance(broadcast_with_distortion(base, {0}, spec, rng)[0], base, scale);
  spec.aggregation = 0.3 * 9.0;  // |S| = 3
  const std::vector<RVec> locals(3, base);
  const double avar = residual_variance(aggregate_with_distortion(locals, {1, 1, 1}, spec, rng), base, scale);
  const double var_err = std::max(std::abs(bvar / 0.3 - 1.0), std::abs(avar / 0.3 - 1.0));

  const Dataset tr = make_synthetic_blobs(2000, 20, 4, 3.0, 81, 82);
  const Dataset te = make_synthetic_blobs(1000, 20, 4, 3.0, 81, 83);
  const PartitionResult pp = partition_dataset(tr, 4, Partition::iid, 84);
  FlConfig bc;
  bc.num_devices = 4;
  bc.rounds = 50;
  bc.learning_rate = 0.05;
  const auto bm = make_model(ModelKind::logistic, 20, 4);
  const FlResult br = run_federated_training(bc, *bm, pp.shards, tr, te, fixed_planner({0, 1, 2, 3}, {}));
  double best = 0.0;
  for (const auto& rm : br.rounds) best = std::max(best, rm.test_accuracy);

  Outcome o;
  o.pass = fd <= 1e-4 && fedavg <= 1e-9 && var_err <= 0.05 && best >= 0.95;
  o.detail = format("gradient rel err %.3g, FedAvg max diff %.3g, variance rel err %.3g, benchmark accuracy %.3f", fd,
                    fedavg, var_err, best);
  return o;
}

Outcome robust_vs_nonrobust() {
  const fs::path dir = scratch("fl");
  const json cfg{{"scenario", "fl_training"},
                 {"profile", "desk"},
                 {"seed", 9},
                 {"num_realizations", 5},
                 {"base", {{"num_devices", 6}, {"num_antennas", 8}}},
                 {"grid", {{"epsilon", {0.1}}, {"design", {"robust", "nonrobust"}}}},
                 {"fl", {{"true_epsilon", 0.1}}}};
  const auto rep = run(cfg, dir);
  const runner::Table t = runner::read_csv_file(rep.files.at(0));
  const int cd = t.column("design");
  const int cr = t.column("realization");
  const int cround = t.column("round");
  const int ca = t.column("test_accuracy");
  const int cs = t.column("status");
  const int cn = t.column("num_selected");
  std::map<std::string, std::map<int, std::pair<int, double>>> last;  // design -> realization -> (round, acc)
  std::map<std::string, double> selected;
  std::map<std::string, int> rows;
  int bad = 0;
  for (const auto& r : t.rows) {
    if (r[cs] != "ok") {
      ++bad;
      continue;
    }
    auto& e = last[r[cd]][std::stoi(r[cr])];
    const int round = std::stoi(r[cround]);
    if (round >= e.first) e = {round, std::stod(r[ca])};
    selected[r[cd]] += std::stod(r[cn]);
    ++rows[r[cd]];
  }
  auto mean_final = [&](const std::string& d) {
    double s = 0.0;
    for (const auto& [k, v] : last[d]) s += v.second;
    return last[d].empty() ? 0.0 : s / static_cast<double>(last[d].size());
  };
  const double rob = mean_final("robust");
  const double non = mean_final("nonrobust");
  fs::remove_all(dir);
  Outcome o;
  o.pass = rep.failed == 0 && bad == 0 && last["robust"].size() == 5 && last["nonrobust"].size() == 5 && rob >= non;
  o.detail = format("mean final accuracy robust %.4f nonrobust %.4f (gap %+.4f), mean |S| %.2f vs %.2f, failed rows %d",
                    rob, non, rob - non, rows["robust"] ? selected["robust"] / rows["robust"] : 0.0,
                    rows["nonrobust"] ? selected["nonrobust"] / rows["nonrobust"] : 0.0, bad + rep.failed);
  return o;
}

runner::Table without_timing(runner::Table t) {
  const int c = t.column("wall_time_s");
  if (c < 0) return t;
  t.header.erase(t.header.begin() + c);
  for (auto& r : t.rows) r.erase(r.begin() + c);
  return t;
}

Outcome determinism() {
  const json small{{"profile", "desk"},
                   {"seed", 10},
                   {"num_realizations", 2},
                   {"base", {{"num_devices", 3}, {"num_antennas", 4}}}};
  std::vector<json> cfgs;
  for (const char* s : {"sparsity_convergence", "selection_vs_gamma", "selection_vs_epsilon", "oracle_validation"}) {
    json j = small;
    j["scenario"] = s;
    cfgs.push_back(j);
  }
  cfgs[1]["grid"] = {{"gamma_b_db", {0, 10}}};
  cfgs[2]["grid"] = {{"epsilon", {0, 0.2}}};
  json f = small;
  f["scenario"] = "fl_training";
  f["grid"] = {{"design", {"robust", "nonrobust", "ideal"}}};
  f["fl"] = {{"rounds", 3}, {"samples", 300}, {"test_samples", 100}};
  cfgs.push_back(f);

  const fs::path dir = scratch("determinism");
  int identical = 0;
  int files = 0;
  std::string differing;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const auto a = run(cfgs[i], dir / ("a" + std::to_string(i)));
    const auto b = run(cfgs[i], dir / ("b" + std::to_string(i)));
    bool same = a.files.size() == b.files.size() && !a.files.empty() && a.failed == 0 && b.failed == 0;
    for (std::size_t k = 0; same && k < a.files.size(); ++k) {
      const runner::Table ta = without_timing(runner::read_csv_file(a.files[k]));
      const runner::Table tb = without_timing(runner::read_csv_file(b.files[k]));
      same = ta.header == tb.header && ta.rows == tb.rows && !ta.rows.empty();
      ++files;
    }
    identical += same;
    if (!same) differing += " " + cfgs[i]["scenario"].get<std::string>();
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = identical == static_cast<int>(cfgs.size());
  o.detail = format("%d/%zu scenarios identical over %d CSV files (wall_time_s excluded)%s%s", identical, cfgs.size(),
                    files, differing.empty() ? "" : ", differing:", differing.c_str());
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria{
    {"S-procedure soundness", s_procedure_soundness},
    {"worst-case closed forms", worst_case_closed_forms},
    {"AO monotonicity", ao_monotonicity},
    {"output feasibility", output_feasibility},
    {"oracle near-optimality", oracle_near_optimality},
    {"trend reproduction", trends},
    {"zero-radius equivalence", zero_radius_equivalence},
    {"FL correctness", fl_correctness},
    {"robust vs nonrobust FL", robust_vs_nonrobust},
    {"end-to-end determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(kCriteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    which.push_back(n);
  }
  if (which.empty())
    for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) which.push_back(i);

  int failed = 0;
  for (int n : which) {
    const Criterion& c = kCriteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-24s %s  %s [%.1f s]\n", n, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
