// Homogeneous self-dual embedding solved by a primal-dual path-following
// method with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//
// Standard form:  minimize c^T x  s.t.  G x + s = h,  A x = b,  s ∈ K,
// embedded as
//   A^T y + G^T z + c tau = 0,   A x - b tau = 0,   s + G x - h tau = 0,
//   kappa + c^T x + b^T y + h^T z = 0,   s, z ∈ K,  tau, kappa >= 0.
// Each Newton system is reduced to the dense normal matrix
// H = G^T (W^T W)^{-1} G; PSD blocks exploit the sparsity of the
// coefficient matrices when forming H.

#include <rfl/conic/solver.hpp>

#include "cones.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>

namespace rfl::conic {

namespace {

using detail::CompiledProgram;
using detail::ConeVec;
using detail::Scaling;

struct KktStep {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  ConeVec z;
};

constexpr int kRefine = 1;
constexpr int kMaxRefine = 5;

// Solves  [0 A^T G^T; A 0 0; G 0 -W^T W] [x; y; z] = [r1; r2; r3].
class KktSolver {
 public:
  explicit KktSolver(const CompiledProgram& cp) : cp_(cp) {}

  bool factor(const Scaling* sc) {
    sc_ = sc;
    const int n = cp_.n;
    const int p = static_cast<int>(cp_.a_rows.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);

    for (std::size_t i = 0; i < cp_.lp_rows.size(); ++i) {
      const double w = sc ? 1.0 / (sc->lp_w(static_cast<Eigen::Index>(i)) * sc->lp_w(static_cast<Eigen::Index>(i))) : 1.0;
      const auto& e = cp_.lp_rows[i].entries;
      for (const auto& [a, va] : e)
        for (const auto& [b, vb] : e) H(a, b) += w * va * vb;
    }

    for (std::size_t k = 0; k < cp_.soc_rows.size(); ++k) {
      const auto& rows = cp_.soc_rows[k];
      std::map<int, int> local;
      for (const auto& r : rows)
        for (const auto& [j, v] : r.entries) local.emplace(j, 0);
      if (local.empty()) continue;
      std::vector<int> vars;
      for (auto& [j, idx] : local) {
        idx = static_cast<int>(vars.size());
        vars.push_back(j);
      }
      const auto m = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd Gk = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(vars.size()));
      for (Eigen::Index i = 0; i < m; ++i)
        for (const auto& [j, v] : rows[i].entries) Gk(i, local[j]) -= v;
      const Eigen::MatrixXd Gs = sc ? Eigen::MatrixXd(sc->soc_Winv[k] * Gk) : Gk;
      const Eigen::MatrixXd Hk = Gs.transpose() * Gs;
      for (std::size_t a = 0; a < vars.size(); ++a)
        for (std::size_t b = 0; b < vars.size(); ++b) H(vars[a], vars[b]) += Hk(a, b);
    }

    for (std::size_t k = 0; k < cp_.sdp_terms.size(); ++k) {
      const auto& terms = cp_.sdp_terms[k];
      const int sz = cp_.dims.sdp[k];
      const Eigen::MatrixXd P = sc ? sc->sdp_P[k] : Eigen::MatrixXd::Identity(sz, sz);
      for (std::size_t i = 0; i < terms.size(); ++i) {
        for (std::size_t j = i; j < terms.size(); ++j) {
          double acc = 0.0;
          for (const auto& e : terms[i].entries)
            for (const auto& f : terms[j].entries) acc += e.value * f.value * P(e.col, f.row) * P(f.col, e.row);
          H(terms[i].var, terms[j].var) += acc;
          if (i != j) H(terms[j].var, terms[i].var) += acc;
        }
      }
    }

    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    const double reg = 1e-13 * scale;
    if (p == 0) {
      H.diagonal().array() += reg;
      llt_.compute(H);
      use_llt_ = llt_.info() == Eigen::Success;
      if (!use_llt_) {
        ldlt_.compute(H);
        if (ldlt_.info() != Eigen::Success) return false;
      }
      use_lu_ = false;
    } else {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
      K.topLeftCorner(n, n) = H;
      K.topLeftCorner(n, n).diagonal().array() += reg;
      for (int i = 0; i < p; ++i)
        for (const auto& [j, v] : cp_.a_rows[static_cast<std::size_t>(i)].entries) {
          K(n + i, j) += v;
          K(j, n + i) += v;
        }
      K.bottomRightCorner(p, p).diagonal().array() -= reg;
      lu_.compute(K);
      use_lu_ = true;
    }
    return true;
  }

  KktStep solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const ConeVec& r3) const {
    KktStep s = solve_once(r1, r2, r3);
    // Iterative refinement against the unregularised system; extra passes
    // only while the residual keeps shrinking.
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kMaxRefine; ++it) {
      const Eigen::VectorXd e1 = r1 - (cp_.apply_At(s.y) + cp_.apply_Gt(s.z));
      const Eigen::VectorXd e2 = r2 - cp_.apply_A(s.x);
      const ConeVec e3 = r3 - (cp_.apply_G(s.x) - apply_WtW(s.z));
      const double err = std::sqrt(e1.squaredNorm() + e2.squaredNorm() + e3.dot(e3));
      if (it >= kRefine && err >= 0.5 * prev) break;
      prev = err;
      const KktStep c = solve_once(e1, e2, e3);
      s.x += c.x;
      s.y += c.y;
      s.z.axpy(1.0, c.z);
    }
    return s;
  }

 private:
  ConeVec apply_WtW(const ConeVec& u) const { return sc_ ? sc_->apply_WtW(u) : u; }
  ConeVec apply_WtW_inv(const ConeVec& u) const { return sc_ ? sc_->apply_WtW_inv(u) : u; }

  KktStep solve_once(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const ConeVec& r3) const {
    const int n = cp_.n;
    const int p = static_cast<int>(cp_.a_rows.size());
    const ConeVec t = apply_WtW_inv(r3);
    const Eigen::VectorXd rhs = r1 + cp_.apply_Gt(t);
    KktStep s;
    if (use_lu_) {
      Eigen::VectorXd full(n + p);
      full << rhs, r2;
      const Eigen::VectorXd sol = lu_.solve(full);
      s.x = sol.head(n);
      s.y = sol.tail(p);
    } else {
      s.x = use_llt_ ? Eigen::VectorXd(llt_.solve(rhs)) : Eigen::VectorXd(ldlt_.solve(rhs));
      s.y = Eigen::VectorXd::Zero(0);
    }
    s.z = apply_WtW_inv(cp_.apply_G(s.x) - r3);
    return s;
  }

  const CompiledProgram& cp_;
  const Scaling* sc_ = nullptr;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool use_llt_ = false;
  bool use_lu_ = false;
};

struct Iterate {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  ConeVec s;
  ConeVec z;
  double tau = 1.0;
  double kappa = 1.0;
};

struct Residuals {
  double pres = 0.0;
  double dres = 0.0;
  double gap = 0.0;
  double relgap = 0.0;
  double pcost = 0.0;
  double dcost = 0.0;
  double pinfres = std::numeric_limits<double>::infinity();
  double dinfres = std::numeric_limits<double>::infinity();
};

}  // namespace

ConicSolution InteriorPointBackend::solve(const ConicProgram& prog, const SolverSettings& settings) const {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const CompiledProgram cp = detail::compile(prog);
  const int n = cp.n;
  const int degree = cp.dims.degree();

  ConicSolution out;
  out.x = Eigen::VectorXd::Zero(n);

  if (degree == 0 && cp.a_rows.empty()) {
    if (cp.c.cwiseAbs().maxCoeff() > 0.0) {
      out.status = SolveStatus::numerical_failure;
      out.message = "unbounded: no constraints";
    } else {
      out.status = SolveStatus::optimal;
      out.objective_value = prog.objective_offset;
    }
    return out;
  }

  const double strict = settings.tol;
  const double loose = 10.0 * settings.tol;
  const double resx0 = std::max(1.0, cp.c.norm());
  const double resy0 = std::max(1.0, cp.b.norm());
  const double resz0 = std::max(1.0, cp.h.norm());
  const ConeVec e = ConeVec::identity(cp.dims);

  KktSolver kkt(cp);
  Iterate it;
  {
    if (!kkt.factor(nullptr)) {
      out.message = "initial KKT factorisation failed";
      return out;
    }
    const ConeVec zero = ConeVec::zeros(cp.dims);
    KktStep primal = kkt.solve(Eigen::VectorXd::Zero(n), cp.b, cp.h);
    it.x = primal.x;
    it.s = primal.z;
    it.s.scale(-1.0);
    KktStep dual = kkt.solve(-cp.c, Eigen::VectorXd::Zero(cp.b.size()), zero);
    it.y = dual.y;
    it.z = dual.z;
    const double ts = detail::boundary_shift(it.s);
    if (ts >= -1e-8 * std::max(1.0, it.s.norm())) it.s.axpy(1.0 + ts, e);
    const double tz = detail::boundary_shift(it.z);
    if (tz >= -1e-8 * std::max(1.0, it.z.norm())) it.z.axpy(1.0 + tz, e);
  }

  auto evaluate = [&](const Iterate& cur) {
    Residuals r;
    const Eigen::VectorXd Gt_z = cp.apply_Gt(cur.z);
    const Eigen::VectorXd At_y = cp.apply_At(cur.y);
    const Eigen::VectorXd Ax = cp.apply_A(cur.x);
    const ConeVec Gx = cp.apply_G(cur.x);
    const double cx = cp.c.dot(cur.x);
    const double by = cp.b.dot(cur.y);
    const double hz = cp.h.dot(cur.z);
    const Eigen::VectorXd rx = At_y + Gt_z + cur.tau * cp.c;
    const Eigen::VectorXd ry = Ax - cur.tau * cp.b;
    ConeVec rz = cur.s + Gx;
    rz.axpy(-cur.tau, cp.h);
    r.pcost = cx / cur.tau;
    r.dcost = -(by + hz) / cur.tau;
    r.pres = std::max(ry.norm() / cur.tau / resy0, rz.norm() / cur.tau / resz0);
    r.dres = rx.norm() / cur.tau / resx0;
    r.gap = cur.s.dot(cur.z) / (cur.tau * cur.tau);
    if (r.pcost < 0.0) r.relgap = r.gap / -r.pcost;
    else if (r.dcost > 0.0) r.relgap = r.gap / r.dcost;
    else r.relgap = kInf;
    if (hz + by < 0.0) r.pinfres = (At_y + Gt_z).norm() / resx0 / -(hz + by);
    if (cx < 0.0) {
      ConeVec g = Gx + cur.s;
      r.dinfres = std::max(Ax.norm() / resy0, g.norm() / resz0) / -cx;
    }
    return r;
  };

  auto finish_optimal = [&](const Iterate& cur, const std::string& msg) {
    out.status = SolveStatus::optimal;
    out.x = cur.x / cur.tau;
    out.objective_value = prog.objective_value(out.x);
    out.message = msg;
  };

  Residuals last;
  Iterate best;
  double best_merit = kInf;
  Scaling sc;
  bool sdp_scaled = false;
  const char* stop_reason = "iteration limit";
  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    out.iterations = iter;
    const Residuals r = evaluate(it);
    last = r;
    const double merit = std::max({r.pres, r.dres, std::min(r.gap, r.relgap)});
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
    }
    if (settings.verbose) {
      std::fprintf(stderr, "%3d pcost %+.9e dcost %+.9e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   iter, r.pcost, r.dcost, r.gap, r.pres, r.dres, it.tau, it.kappa);
    }
    if (r.pres <= strict && r.dres <= strict && (r.gap <= strict || r.relgap <= strict)) {
      finish_optimal(it, "converged");
      return out;
    }
    if (r.pinfres <= strict) {
      out.status = SolveStatus::infeasible;
      out.message = "primal infeasibility certificate";
      return out;
    }
    if (r.dinfres <= strict) {
      out.status = SolveStatus::numerical_failure;
      out.message = "dual infeasibility certificate (unbounded)";
      return out;
    }
    if (iter == settings.max_iterations) break;

    if (!detail::compute_scaling(cp.dims, it.s, it.z, sc, sdp_scaled)) {
      stop_reason = "scaling failed";
      break;
    }
    sdp_scaled = true;
    if (!kkt.factor(&sc)) {
      stop_reason = "factorisation failed";
      break;
    }

    const Eigen::VectorXd rx = cp.apply_At(it.y) + cp.apply_Gt(it.z) + it.tau * cp.c;
    const Eigen::VectorXd ry = cp.apply_A(it.x) - it.tau * cp.b;
    ConeVec rz = it.s + cp.apply_G(it.x);
    rz.axpy(-it.tau, cp.h);
    const double rt = it.kappa + cp.c.dot(it.x) + cp.b.dot(it.y) + cp.h.dot(it.z);
    const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (degree + 1);

    const KktStep d1 = kkt.solve(-cp.c, cp.b, cp.h);
    const double denom = cp.c.dot(d1.x) + cp.b.dot(d1.y) + cp.h.dot(d1.z) - it.kappa / it.tau;
    const ConeVec lam_sq = detail::jordan_product(sc.lambda, sc.lambda);

    double sigma = 0.0;
    ConeVec corr = ConeVec::zeros(cp.dims);
    double corr_tau = 0.0;
    double step = 0.0;
    KktStep dir;
    ConeVec ds_scaled;
    ConeVec dz_scaled;
    ConeVec ds;
    double dtau = 0.0;
    double dkappa = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      ConeVec v = lam_sq;
      v.scale(-1.0).axpy(sigma * mu, e).axpy(-1.0, corr);
      const ConeVec xi = detail::jordan_divide(sc, v);
      const double f = 1.0 - sigma;
      ConeVec r3 = rz;
      r3.scale(-f).axpy(-1.0, sc.apply_Wt(xi));
      const KktStep d2 = kkt.solve(-f * rx, -f * ry, r3);
      const double r4 = -f * rt - (-it.tau * it.kappa + sigma * mu - corr_tau) / it.tau;
      dtau = (r4 - (cp.c.dot(d2.x) + cp.b.dot(d2.y) + cp.h.dot(d2.z))) / denom;
      dir.x = d2.x + dtau * d1.x;
      dir.y = d2.y + dtau * d1.y;
      dir.z = d2.z;
      dir.z.axpy(dtau, d1.z);
      dz_scaled = sc.apply_W(dir.z);
      // ds from the linearised primal residual rather than xi - W dz, so
      // that the primal residual contracts exactly with the step.
      ds = cp.apply_G(dir.x);
      ds.scale(-1.0).axpy(-f, rz).axpy(dtau, cp.h);
      ds_scaled = sc.apply_Wt_inv(ds);
      dkappa = (-it.tau * it.kappa + sigma * mu - corr_tau - it.kappa * dtau) / it.tau;

      double amax = std::min(detail::max_step_scaled(sc, ds_scaled), detail::max_step_scaled(sc, dz_scaled));
      if (dtau < 0.0) amax = std::min(amax, -it.tau / dtau);
      if (dkappa < 0.0) amax = std::min(amax, -it.kappa / dkappa);

      if (pass == 0) {
        const double aa = std::min(1.0, amax);
        sigma = std::pow(std::max(0.0, 1.0 - aa), 3.0);
        corr = detail::jordan_product(ds_scaled, dz_scaled);
        corr_tau = dtau * dkappa;
      } else {
        step = std::min(1.0, 0.99 * amax);
      }
    }

    // Round-off can leave a full step just outside the cone when blocks are
    // nearly singular; shorten until both iterates are strictly interior.
    bool moved = false;
    for (int bt = 0; bt < 30 && step > 1e-12; ++bt, step *= 0.7) {
      if (detail::advance(sc, step, ds, ds_scaled, dir.z, dz_scaled, it.s, it.z)) {
        moved = true;
        break;
      }
    }
    if (!moved || !std::isfinite(step)) {
      stop_reason = "step too small";
      break;
    }
    it.x += step * dir.x;
    it.y += step * dir.y;
    it.tau += step * dtau;
    it.kappa += step * dkappa;
  }

  // Budget exhausted or numerical stall: accept a point that meets the
  // requested tolerance, otherwise classify.
  if (last.pres <= loose && last.dres <= loose && (last.gap <= loose || last.relgap <= loose)) {
    finish_optimal(it, "converged to requested tolerance only");
    return out;
  }
  // Late loss of accuracy can push an iterate back out of tolerance.
  if (best_merit <= loose) {
    finish_optimal(best, "converged to requested tolerance at an earlier iterate");
    return out;
  }
  if (last.pinfres <= loose || (it.tau < 1e-8 * it.kappa && last.pinfres < 1e-3)) {
    out.status = SolveStatus::infeasible;
    out.message = "infeasibility detected at iteration budget";
    return out;
  }
  out.status = SolveStatus::numerical_failure;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%s after %d iterations (pres %.2e dres %.2e gap %.2e)", stop_reason,
                out.iterations, last.pres, last.dres, last.gap);
  out.message = buf;
  out.x = it.x / it.tau;
  out.objective_value = prog.objective_value(out.x);
  return out;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

ConicSolution solve(const ConicProgram& p, const SolverSettings& settings, const Backend* backend) {
  validate(p);
  static const InteriorPointBackend default_backend;
  const Backend& be = backend ? *backend : default_backend;
  ConicSolution sol = be.solve(p, settings);
  if (sol.x.size() == p.num_vars) {
    sol.max_constraint_violation = std::max(0.0, verify_solution(p, sol.x).max_violation());
  }
  return sol;
}

}  // namespace rfl::conic
