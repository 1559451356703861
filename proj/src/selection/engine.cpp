#include <rfl/selection.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rfl {

namespace {

bool settled(const std::vector<double>& v, double nu) {
  const std::size_t n = v.size();
  return n >= 2 && std::abs(v[n - 1] - v[n - 2]) < nu;
}

std::string describe(const char* which, const SubproblemResult& r) {
  return std::string(which) + " subproblem " + conic::to_string(r.status) +
         (r.message.empty() ? "" : ": " + r.message);
}

}  // namespace

SparsityResult sparsity_inducing(const ChannelSet& ch, const SelectionConfig& cfg) {
  cfg.validate(ch.num_devices);
  SparsityResult res;
  res.tx = initialize_transceivers(ch, cfg, {}, true);
  res.chi = RVec::Zero(ch.num_devices);
  for (int it = 0; it < cfg.max_ao_iters; ++it) {
    const SubproblemResult dev = solve_device_subproblem(ch, cfg, res.tx);
    if (!dev.ok()) throw SubproblemFailure(describe("device", dev), it);
    const SubproblemResult bs = solve_bs_subproblem(ch, cfg, dev.tx);
    if (!bs.ok()) throw SubproblemFailure(describe("bs", bs), it);
    res.tx = bs.tx;
    res.chi = bs.chi;
    res.trace.values.push_back(bs.chi.sum());
    if (settled(res.trace.values, cfg.nu1)) {
      res.trace.converged = true;
      break;
    }
  }
  res.trace.cap_hit = !res.trace.converged;
  return res;
}

std::vector<int> rank_devices(const RVec& chi, double zero_tol) {
  std::vector<int> idx(chi.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](int k) { return chi(k) < zero_tol ? 0.0 : chi(k); };
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) < key(b); });
  return idx;
}

namespace {

FeasibilityAttempt run_feasibility(const ChannelSet& ch, const SelectionConfig& cfg, FeasibilityAttempt a) {
  for (int it = 0; it < cfg.max_ao_iters; ++it) {
    const SubproblemResult dev = solve_feasibility_device_subproblem(ch, cfg, a.set, a.tx);
    if (!dev.ok()) {
      a.failure = describe("device", dev) + " at iteration " + std::to_string(it);
      return a;
    }
    const SubproblemResult bs = solve_feasibility_bs_subproblem(ch, cfg, a.set, dev.tx);
    if (!bs.ok()) {
      a.failure = describe("bs", bs) + " at iteration " + std::to_string(it);
      return a;
    }
    a.tx = bs.tx;
    a.objective = bs.objective;
    a.trace.values.push_back(bs.objective);
    if (settled(a.trace.values, cfg.nu2)) {
      a.trace.converged = true;
      break;
    }
  }
  a.trace.cap_hit = !a.trace.converged;
  a.feasible = a.objective <= cfg.gamma_b;
  return a;
}

}  // namespace

FeasibilityAttempt feasibility_ao(const ChannelSet& ch, const SelectionConfig& cfg,
                                  const std::vector<int>& set, const TransceiverSet* warm) {
  FeasibilityAttempt a;
  a.set = set;
  std::sort(a.set.begin(), a.set.end());
  a.m = static_cast<int>(a.set.size());
  if (a.set.empty()) {
    a.feasible = true;
    a.tx = TransceiverSet::zeros(ch.num_antennas, ch.num_devices);
    a.tx.p_max = cfg.p_max;
    a.tx.p_dev = cfg.p_dev;
    return a;
  }
  // Beams matched to the set first; the sparsity-stage transceivers are the
  // fallback when that start cannot reach the uplink bound.
  std::vector<TransceiverSet> starts;
  starts.push_back(initialize_transceivers(ch, cfg, a.set, false));
  if (warm != nullptr) starts.push_back(*warm);
  FeasibilityAttempt last;
  for (const auto& tx : starts) {
    FeasibilityAttempt trial = a;
    trial.tx = tx;
    last = run_feasibility(ch, cfg, std::move(trial));
    if (last.feasible) break;
  }
  return last;
}

SelectionOutcome feasibility_detect(const std::vector<int>& permutation, const ChannelSet& ch,
                                    const SelectionConfig& cfg, const TransceiverSet* warm) {
  cfg.validate(ch.num_devices);
  SelectionOutcome out;
  out.permutation = permutation;
  out.transceivers = TransceiverSet::zeros(ch.num_antennas, ch.num_devices);
  out.transceivers.p_max = cfg.p_max;
  out.transceivers.p_dev = cfg.p_dev;
  const int K = static_cast<int>(permutation.size());
  auto prefix = [&](int m) { return std::vector<int>(permutation.begin(), permutation.begin() + m); };

  const FeasibilityAttempt* accepted = nullptr;
  if (!cfg.binary_search) {
    for (int m = K; m >= 1; --m) {
      out.feasibility_trace.push_back(feasibility_ao(ch, cfg, prefix(m), warm));
      if (out.feasibility_trace.back().feasible) {
        accepted = &out.feasibility_trace.back();
        break;
      }
    }
  } else {
    // Largest feasible prefix assuming feasibility is monotone in m.
    int lo = 0;
    int hi = K;
    std::size_t best = 0;
    bool have = false;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      out.feasibility_trace.push_back(feasibility_ao(ch, cfg, prefix(mid), warm));
      if (out.feasibility_trace.back().feasible) {
        lo = mid;
        best = out.feasibility_trace.size() - 1;
        have = true;
      } else {
        hi = mid - 1;
      }
    }
    if (have) accepted = &out.feasibility_trace[best];
  }

  if (accepted != nullptr) {
    out.selected = accepted->set;
    out.m_final = accepted->m;
    out.transceivers = accepted->tx;
    out.objective = accepted->objective;
  }
  out.achieved = evaluate_mse(ch, out.transceivers, out.selected);
  return out;
}

SelectionOutcome select_devices(const ChannelSet& ch, const SelectionConfig& cfg) {
  const SparsityResult sp = sparsity_inducing(ch, cfg);
  SelectionOutcome out = feasibility_detect(rank_devices(sp.chi, cfg.chi_zero_tol), ch, cfg, &sp.tx);
  out.chi = sp.chi;
  out.sparsity_trace = sp.trace;
  return out;
}

OracleResult exhaustive_oracle(const ChannelSet& ch, const SelectionConfig& cfg) {
  const int K = ch.num_devices;
  if (K > 10) throw ConfigError("exhaustive_oracle: too many devices to enumerate");
  cfg.validate(K);
  const SparsityResult sp = sparsity_inducing(ch, cfg);
  OracleResult r;
  for (unsigned mask = 1; mask < (1u << K); ++mask) {
    std::vector<int> set;
    for (int k = 0; k < K; ++k)
      if (mask & (1u << k)) set.push_back(k);
    const FeasibilityAttempt a = feasibility_ao(ch, cfg, set, &sp.tx);
    if (!a.feasible) continue;
    r.feasible_sets.push_back(set);
    if (static_cast<int>(set.size()) > r.max_size) {
      r.max_size = static_cast<int>(set.size());
      r.witness = set;
    }
  }
  return r;
}

nlohmann::json to_json(const SelectionOutcome& o) {
  nlohmann::json j;
  j["chi"] = std::vector<double>(o.chi.data(), o.chi.data() + o.chi.size());
  j["permutation"] = o.permutation;
  j["selected"] = o.selected;
  j["m_final"] = o.m_final;
  j["objective"] = o.objective;
  j["transceivers"] = to_json(o.transceivers);
  j["achieved"] = to_json(o.achieved);
  j["sparsity_trace"] = {{"values", o.sparsity_trace.values},
                         {"converged", o.sparsity_trace.converged},
                         {"cap_hit", o.sparsity_trace.cap_hit}};
  auto& ft = j["feasibility_trace"] = nlohmann::json::array();
  for (const auto& a : o.feasibility_trace)
    ft.push_back({{"m", a.m},
                  {"set", a.set},
                  {"values", a.trace.values},
                  {"converged", a.trace.converged},
                  {"cap_hit", a.trace.cap_hit},
                  {"feasible", a.feasible},
                  {"objective", a.objective},
                  {"failure", a.failure}});
  return j;
}

}  // namespace rfl
