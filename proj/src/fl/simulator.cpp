#include <rfl/fl/simulator.hpp>

#include <cmath>
#include <ostream>

namespace rfl::fl {

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "synthetic_blobs") return DatasetKind::synthetic_blobs;
  if (s == "mnist_subset") return DatasetKind::mnist_subset;
  if (s == "mnist_full") return DatasetKind::mnist_full;
  throw ConfigError("unknown dataset '" + s + "'");
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::synthetic_blobs: return "synthetic_blobs";
    case DatasetKind::mnist_subset: return "mnist_subset";
    case DatasetKind::mnist_full: return "mnist_full";
  }
  return "unknown";
}

Partition partition_from_string(const std::string& s) {
  if (s == "iid") return Partition::iid;
  if (s == "non_iid") return Partition::non_iid;
  throw ConfigError("unknown partition '" + s + "'");
}

std::string to_string(Partition p) { return p == Partition::iid ? "iid" : "non_iid"; }

void FlConfig::validate() const {
  if (num_devices < 1) throw ConfigError("num_devices must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (local_epochs < 1 && local_steps < 1) throw ConfigError("need local_epochs >= 1 or local_steps >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

void DistortionSpec::validate() const {
  if (!(aggregation >= 0.0)) throw ConfigError("aggregation variance must be nonnegative");
  for (double v : broadcast)
    if (!(v >= 0.0)) throw ConfigError("broadcast variances must be nonnegative");
}

DistortionSpec distortion_from_mse(const MseReport& mse) {
  DistortionSpec d;
  d.broadcast = mse.downlink;
  d.aggregation = mse.uplink;
  d.source = DistortionSpec::Source::from_selection_outcome;
  return d;
}

NormStats norm_stats(const RVec& q) {
  NormStats st;
  if (q.size() == 0) return st;
  st.mean = q.mean();
  const double var = (q.array() - st.mean).square().mean();
  st.scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return st;
}

RVec normalize(const RVec& q, const NormStats& st) { return (q.array() - st.mean).matrix() / st.scale; }

RVec denormalize(const RVec& q, const NormStats& st) { return (q * st.scale).array() + st.mean; }

namespace {

void add_noise(RVec& v, double variance, Rng& rng) {
  if (variance <= 0.0) return;
  std::normal_distribution<double> g(0.0, std::sqrt(variance));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += g(rng);
}

}  // namespace

std::vector<RVec> broadcast_with_distortion(const RVec& q_global, const std::vector<int>& devices,
                                            const DistortionSpec& spec, Rng& rng) {
  spec.validate();
  const NormStats st = norm_stats(q_global);
  const RVec base = normalize(q_global, st);
  std::vector<RVec> out;
  out.reserve(devices.size());
  for (int k : devices) {
    const double var =
        static_cast<std::size_t>(k) < spec.broadcast.size() ? spec.broadcast[static_cast<std::size_t>(k)] : 0.0;
    if (var <= 0.0) {
      out.push_back(q_global);
      continue;
    }
    RVec r = base;
    add_noise(r, var, rng);
    out.push_back(denormalize(r, st));
  }
  return out;
}

RVec aggregate_with_distortion(const std::vector<RVec>& locals, const std::vector<double>& weights,
                               const DistortionSpec& spec, Rng& rng) {
  spec.validate();
  if (locals.empty()) throw std::invalid_argument("aggregate_with_distortion: empty device set");
  if (weights.size() != locals.size()) throw std::invalid_argument("aggregate_with_distortion: one weight per local");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) throw std::invalid_argument("aggregate_with_distortion: weights must sum to a positive value");

  RVec mean = RVec::Zero(locals.front().size());
  for (std::size_t i = 0; i < locals.size(); ++i) mean += (weights[i] / wsum) * locals[i];
  const double m = static_cast<double>(locals.size());
  const double var = spec.aggregation / (m * m);
  if (var <= 0.0) return mean;
  // Shared statistics over all uploaded entries; the mean of the normalised
  // locals is then the normalised mean.
  double mu = 0.0;
  double sq = 0.0;
  double count = 0.0;
  for (const auto& q : locals) {
    mu += q.sum();
    sq += q.squaredNorm();
    count += static_cast<double>(q.size());
  }
  NormStats st;
  st.mean = mu / count;
  const double v = sq / count - st.mean * st.mean;
  st.scale = v > 0.0 ? std::sqrt(v) : 1.0;
  RVec r = normalize(mean, st);
  add_noise(r, var, rng);
  return denormalize(r, st);
}

Planner fixed_planner(std::vector<int> selected, DistortionSpec spec) {
  spec.validate();
  return [selected = std::move(selected), spec = std::move(spec)](int) {
    RoundPlan p;
    p.selected = selected;
    p.distortion = spec;
    p.mse_bs = spec.aggregation;
    double s = 0.0;
    for (int k : selected)
      if (static_cast<std::size_t>(k) < spec.broadcast.size()) s += spec.broadcast[static_cast<std::size_t>(k)];
    p.mse_device_mean = selected.empty() ? 0.0 : s / static_cast<double>(selected.size());
    return p;
  };
}

Planner selection_planner(int num_devices, SelectionPlannerConfig cfg) {
  if (num_devices < 1) throw ConfigError("selection planner needs at least one device");
  return [num_devices, cfg](int round) {
    GeometryConfig geom = cfg.geometry;
    geom.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(round));
    const ChannelSet ch = generate_channels(num_devices, cfg.num_antennas, geom,
                                            std::vector<double>(num_devices, cfg.true_radius), cfg.noise_dl, cfg.noise_ul);
    ChannelSet design = ch;
    design.radii.assign(static_cast<std::size_t>(num_devices), cfg.design_radius);
    SelectionConfig scfg = make_selection_config(cfg.db, design);
    scfg.solver = cfg.solver;
    scfg.nu1 = cfg.nu1;
    scfg.nu2 = cfg.nu2;
    scfg.max_ao_iters = cfg.max_ao_iters;
    scfg.force_lmi = cfg.force_lmi;
    scfg.binary_search = cfg.binary_search;
    RoundPlan p;
    SelectionOutcome out;
    try {
      out = select_devices(design, scfg);
    } catch (const SubproblemFailure&) {
      return p;  // no usable design this block: round is skipped
    }
    p.selected = out.selected;
    const MseReport mse = cfg.realized ? realized_mse(ch, out.transceivers, out.selected) : out.achieved;
    p.distortion = distortion_from_mse(mse);
    p.mse_bs = mse.uplink;
    double s = 0.0;
    for (int k : p.selected) s += mse.downlink[static_cast<std::size_t>(k)];
    p.mse_device_mean = p.selected.empty() ? 0.0 : s / static_cast<double>(p.selected.size());
    return p;
  };
}

FlResult run_federated_training(const FlConfig& cfg, const Model& model, const std::vector<Dataset>& shards,
                                const Dataset& train_eval, const Dataset& test, const Planner& planner) {
  cfg.validate();
  if (static_cast<int>(shards.size()) != cfg.num_devices)
    throw ConfigError("one data shard per device is required");
  FlResult res;
  RVec q = model.initial_params(mix_seed(cfg.seed, 10));
  const auto k_count = static_cast<std::uint64_t>(cfg.num_devices);
  for (int t = 1; t <= cfg.rounds; ++t) {
    const RoundPlan plan = planner(t);
    RoundMetrics m;
    m.round = t;
    m.num_selected = static_cast<int>(plan.selected.size());
    m.mse_bs = plan.mse_bs;
    m.mse_device_mean = plan.mse_device_mean;
    if (plan.selected.empty()) {
      m.skipped = true;
    } else {
      for (int k : plan.selected)
        if (k < 0 || k >= cfg.num_devices) throw ConfigError("planner selected an unknown device");
      Rng noise(mix_seed(mix_seed(cfg.seed, 11), static_cast<std::uint64_t>(t)));
      const std::vector<RVec> start = broadcast_with_distortion(q, plan.selected, plan.distortion, noise);
      std::vector<RVec> locals;
      std::vector<double> weights;
      for (std::size_t i = 0; i < plan.selected.size(); ++i) {
        const int k = plan.selected[i];
        const auto sgd_seed = mix_seed(mix_seed(cfg.seed, 12), static_cast<std::uint64_t>(t) * k_count + k);
        const LocalUpdate u = local_update(model, start[i], shards[static_cast<std::size_t>(k)], cfg.learning_rate,
                                           cfg.local_epochs, cfg.batch_size, sgd_seed, cfg.local_steps);
        if (u.empty_data) continue;
        locals.push_back(u.q);
        weights.push_back(static_cast<double>(shards[static_cast<std::size_t>(k)].size()));
      }
      if (locals.empty())
        m.skipped = true;
      else
        q = aggregate_with_distortion(locals, weights, plan.distortion, noise);
    }
    m.train_loss = evaluate(model, q, train_eval).loss;
    const EvalResult te = evaluate(model, q, test);
    m.test_loss = te.loss;
    m.test_accuracy = te.accuracy;
    res.rounds.push_back(m);
  }
  res.final_params = q;
  return res;
}

void write_metrics_csv(std::ostream& os, const FlResult& r) {
  os << "round,train_loss,test_loss,test_accuracy,num_selected,mse_bs,mse_device_mean,skipped\n";
  os.precision(10);
  for (const auto& m : r.rounds)
    os << m.round << ',' << m.train_loss << ',' << m.test_loss << ',' << m.test_accuracy << ',' << m.num_selected
       << ',' << m.mse_bs << ',' << m.mse_device_mean << ',' << (m.skipped ? 1 : 0) << '\n';
}

}  // namespace rfl::fl
