#include <rfl/selection.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

namespace rfl {

using conic::AffineScalar;
using conic::ConicProgram;
using conic::SocConstraint;

namespace {

struct DeviceVars {
  int k = 0;
  CAffine v;
  CAffine b;
  int rho = -1;
  int theta = -1;
  int chi = -1;
  int alpha = -1;
  int beta = -1;
};

struct Layout {
  CAffineVec w;
  CAffineVec z;
  int z_epigraph = -1;
  std::vector<DeviceVars> dev;
};

CAffine complex_var(ConicProgram& p, const std::string& name) {
  const int re = p.add_variable(name + ".re");
  const int im = p.add_variable(name + ".im");
  return CAffine::variable(re, im);
}

CAffineVec complex_vec_var(ConicProgram& p, const std::string& name, int n) {
  CAffineVec v;
  for (int i = 0; i < n; ++i) v.push_back(complex_var(p, name + "[" + std::to_string(i) + "]"));
  return v;
}

std::vector<AffineScalar> real_parts(const CAffineVec& v) {
  std::vector<AffineScalar> out;
  for (const auto& e : v) {
    out.push_back(e.real());
    out.push_back(e.imag());
  }
  return out;
}

// With the beam fixed, a unitary change of basis taking it to ||beam|| e_1
// turns each robust block into a 3x3 block plus a decoupled multiple of the
// identity (already covered by the multiplier's sign constraint). Returns the
// one-dimensional beam and channel with the same inner product.
std::pair<CAffineVec, CVec> compress(const CVec& beam, const CVec& h) {
  const double nrm = beam.norm();
  CVec h1 = CVec::Zero(1);
  if (nrm > 0.0) h1(0) = beam.dot(h) / nrm;
  return {constant_vec(CVec::Constant(1, cplx(nrm, 0.0))), h1};
}

AffineScalar var(int j, double coef = 1.0) {
  AffineScalar a;
  a.add(j, coef);
  return a;
}

Layout build(const SubproblemSpec& s, ConicProgram& p) {
  const ChannelSet& ch = *s.channels;
  const SelectionConfig& cfg = *s.config;
  const int n = ch.num_antennas;
  const bool bs_free = s.side == Side::bs;
  const bool sparsity = s.stage == Stage::sparsity;

  Layout L;
  if (bs_free) {
    L.w = complex_vec_var(p, "w", n);
    L.z = complex_vec_var(p, "z", n);
  } else {
    L.w = constant_vec(s.current.w);
    L.z = constant_vec(s.current.z);
  }

  for (int k : s.devices) {
    DeviceVars d;
    d.k = k;
    const std::string tag = "[" + std::to_string(k) + "]";
    if (bs_free) {
      d.v = CAffine(s.current.v[k]);
      d.b = CAffine(s.current.b[k]);
    } else {
      d.v = complex_var(p, "v" + tag);
      d.b = complex_var(p, "b" + tag);
    }
    d.rho = p.add_variable("rho" + tag);
    d.theta = p.add_variable("theta" + tag);
    if (sparsity) d.chi = p.add_variable("chi" + tag);
    const bool lmi = ch.radii[k] > 0.0 || cfg.force_lmi;
    if (lmi) {
      d.alpha = p.add_variable("alpha" + tag);
      d.beta = p.add_variable("beta" + tag);
    }
    L.dev.push_back(d);
  }

  for (const auto& d : L.dev) {
    const int k = d.k;
    UplinkLmiSpec up{d.b, L.z, ch.estimated[k], ch.radii[k], d.rho, d.chi, d.alpha, s.stage};
    DownlinkLmiSpec dn{d.v, L.w, ch.estimated[k], ch.radii[k], d.theta, d.beta};
    if (!bs_free) {
      std::tie(up.z, up.h_hat) = compress(s.current.z, ch.estimated[k]);
      std::tie(dn.w, dn.h_hat) = compress(s.current.w, ch.estimated[k]);
    }
    if (d.alpha >= 0) {
      add_lmi(p, uplink_robust_lmi(up));
      add_lmi(p, downlink_robust_lmi(dn));
      p.nonneg.push_back(var(d.alpha));
      p.nonneg.push_back(var(d.beta));
    } else {
      p.soc_constraints.push_back(uplink_direct_constraint(up));
      p.soc_constraints.push_back(downlink_direct_constraint(dn));
    }
    p.nonneg.push_back(var(d.rho));
    p.nonneg.push_back(var(d.theta));
    if (sparsity) p.nonneg.push_back(var(d.chi));

    // theta + sigma0^2 |v|^2 <= gamma_d (+ chi)
    AffineScalar slack(cfg.gamma_d[k]);
    slack.add(d.theta, -1.0);
    if (sparsity) slack.add(d.chi, 1.0);
    if (bs_free) {
      slack.constant -= ch.noise_dl * std::norm(s.current.v[k]);
      p.nonneg.push_back(slack);
    } else {
      AffineScalar t;
      t.add(slack, 1.0 / ch.noise_dl);
      p.soc_constraints.push_back(
          conic::rotated_cone({d.v.real(), d.v.imag()}, t, AffineScalar(1.0)));
      p.soc_constraints.push_back({{d.b.real(), d.b.imag()}, AffineScalar(std::sqrt(cfg.p_dev[k]))});
    }
  }

  if (bs_free) p.soc_constraints.push_back({real_parts(L.w), AffineScalar(std::sqrt(cfg.p_max))});

  // sum rho + sigma1^2 ||z||^2: bounded by gamma_b (sparsity) or minimised
  AffineScalar rho_sum;
  for (const auto& d : L.dev) rho_sum.add(d.rho, 1.0);
  if (sparsity) {
    AffineScalar room(cfg.gamma_b);
    room.add(rho_sum, -1.0);
    if (bs_free) {
      AffineScalar t;
      t.add(room, 1.0 / ch.noise_ul);
      p.soc_constraints.push_back(conic::rotated_cone(real_parts(L.z), t, AffineScalar(1.0)));
    } else {
      room.constant -= ch.noise_ul * s.current.z.squaredNorm();
      p.nonneg.push_back(room);
    }
    for (const auto& d : L.dev) p.objective(d.chi) = 1.0;
  } else {
    for (const auto& d : L.dev) p.objective(d.rho) = 1.0;
    if (bs_free) {
      L.z_epigraph = p.add_variable("z_sq");
      p.objective(L.z_epigraph) = ch.noise_ul;
      p.soc_constraints.push_back(conic::rotated_cone(real_parts(L.z), var(L.z_epigraph), AffineScalar(1.0)));
    } else {
      p.objective_offset = ch.noise_ul * s.current.z.squaredNorm();
    }
  }
  return L;
}

}  // namespace

void SelectionConfig::validate(int num_devices) const {
  if (!(gamma_b > 0.0)) throw ConfigError("gamma_b must be positive");
  if (!(p_max > 0.0)) throw ConfigError("p_max must be positive");
  if (static_cast<int>(gamma_d.size()) != num_devices || static_cast<int>(p_dev.size()) != num_devices)
    throw ConfigError("per-device thresholds/powers must have one entry per device");
  for (double g : gamma_d)
    if (!(g > 0.0)) throw ConfigError("gamma_d entries must be positive");
  for (double q : p_dev)
    if (!(q > 0.0)) throw ConfigError("p_dev entries must be positive");
  if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw ConfigError("convergence accuracies must be positive");
  if (max_ao_iters < 1) throw ConfigError("max_ao_iters must be >= 1");
}

SelectionConfig make_selection_config(const DbConventions& conv, const ChannelSet& ch) {
  const LinearParams lin = db_to_linear(conv, ch.noise_dl, ch.noise_ul);
  SelectionConfig cfg;
  cfg.gamma_b = lin.gamma_b;
  cfg.gamma_d.assign(ch.num_devices, lin.gamma_d);
  cfg.p_max = lin.p_max;
  cfg.p_dev.assign(ch.num_devices, lin.p_dev);
  return cfg;
}

ConicProgram build_subproblem(const SubproblemSpec& spec) {
  ConicProgram p;
  build(spec, p);
  p.objective.conservativeResize(p.num_vars);
  return p;
}

SubproblemResult solve_subproblem(const SubproblemSpec& spec) {
  if (spec.channels == nullptr || spec.config == nullptr)
    throw std::invalid_argument("solve_subproblem: missing channels or config");
  if (spec.devices.empty()) throw std::invalid_argument("solve_subproblem: empty device set");
  const ChannelSet& ch = *spec.channels;

  ConicProgram p;
  const Layout L = build(spec, p);
  const conic::ConicSolution sol = conic::solve(p, spec.config->solver);

  SubproblemResult r;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.message = sol.message;
  r.num_vars = p.num_vars;
  r.tx = spec.current;
  r.tx.p_max = spec.config->p_max;
  r.tx.p_dev = spec.config->p_dev;
  r.chi = RVec::Zero(ch.num_devices);
  r.rho = RVec::Zero(ch.num_devices);
  r.theta = RVec::Zero(ch.num_devices);
  if (!sol.optimal()) return r;

  const RVec& x = sol.x;
  r.objective = sol.objective_value;
  if (spec.side == Side::bs) {
    r.tx.w = evaluate(L.w, x);
    r.tx.z = evaluate(L.z, x);
  }
  for (const auto& d : L.dev) {
    if (spec.side == Side::device) {
      r.tx.v[d.k] = d.v.evaluate(x);
      r.tx.b[d.k] = d.b.evaluate(x);
    }
    r.rho(d.k) = x(d.rho);
    r.theta(d.k) = x(d.theta);
    if (d.chi >= 0) r.chi(d.k) = std::max(0.0, x(d.chi));
  }
  return r;
}

namespace {

std::vector<int> all_devices(const ChannelSet& ch) {
  std::vector<int> s(ch.num_devices);
  for (int k = 0; k < ch.num_devices; ++k) s[k] = k;
  return s;
}

SubproblemResult run(const ChannelSet& ch, const SelectionConfig& cfg, std::vector<int> set,
                     Stage stage, Side side, const TransceiverSet& current) {
  SubproblemSpec s;
  s.channels = &ch;
  s.config = &cfg;
  s.devices = std::move(set);
  s.stage = stage;
  s.side = side;
  s.current = current;
  return solve_subproblem(s);
}

}  // namespace

SubproblemResult solve_device_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                         const TransceiverSet& current) {
  return run(ch, cfg, all_devices(ch), Stage::sparsity, Side::device, current);
}

SubproblemResult solve_bs_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                     const TransceiverSet& current) {
  return run(ch, cfg, all_devices(ch), Stage::sparsity, Side::bs, current);
}

SubproblemResult solve_feasibility_device_subproblem(const ChannelSet& ch,
                                                     const SelectionConfig& cfg,
                                                     const std::vector<int>& set,
                                                     const TransceiverSet& current) {
  return run(ch, cfg, set, Stage::feasibility, Side::device, current);
}

SubproblemResult solve_feasibility_bs_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                                 const std::vector<int>& set,
                                                 const TransceiverSet& current) {
  return run(ch, cfg, set, Stage::feasibility, Side::bs, current);
}

TransceiverSet initialize_transceivers(const ChannelSet& ch, const SelectionConfig& cfg,
                                       const std::vector<int>& devices, bool scale_z) {
  TransceiverSet tx = TransceiverSet::zeros(ch.num_antennas, ch.num_devices);
  tx.p_max = cfg.p_max;
  tx.p_dev = cfg.p_dev;
  // Dominant direction of the gain-normalised channel correlation, so weak
  // devices count as much as strong ones.
  CMat R = CMat::Zero(ch.num_antennas, ch.num_antennas);
  auto accumulate = [&](int k) {
    const double g = ch.estimated[k].squaredNorm();
    if (g > 0.0 && std::isfinite(g)) R += ch.estimated[k] * ch.estimated[k].adjoint() / g;
  };
  if (devices.empty())
    for (int k = 0; k < ch.num_devices; ++k) accumulate(k);
  else
    for (int k : devices) accumulate(k);
  CVec dir = CVec::Zero(ch.num_antennas);
  if (R.cwiseAbs().maxCoeff() > 0.0) {
    const Eigen::SelfAdjointEigenSolver<CMat> es(R);
    dir = es.eigenvectors().col(ch.num_antennas - 1);
    // Fix the phase: largest entry real and positive.
    Eigen::Index i = 0;
    dir.cwiseAbs().maxCoeff(&i);
    dir *= std::conj(dir(i)) / std::abs(dir(i));
  } else {
    dir(0) = 1.0;
  }
  double zscale = 1.0;
  if (scale_z) zscale = std::min(1.0, std::sqrt(0.5 * cfg.gamma_b / ch.noise_ul));
  tx.z = dir * zscale;
  tx.w = dir * (0.9 * std::sqrt(cfg.p_max));
  return tx;
}

}  // namespace rfl
