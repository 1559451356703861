#include "cones.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <map>

namespace rfl::conic::detail {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int Dims::degree() const {
  int d = lp + static_cast<int>(soc.size());
  for (int s : sdp) d += s;
  return d;
}

ConeVec ConeVec::zeros(const Dims& d) {
  ConeVec v;
  v.lp = Eigen::VectorXd::Zero(d.lp);
  for (int s : d.soc) v.soc.push_back(Eigen::VectorXd::Zero(s));
  for (int s : d.sdp) v.sdp.push_back(Eigen::MatrixXd::Zero(s, s));
  return v;
}

ConeVec ConeVec::identity(const Dims& d) {
  ConeVec v = zeros(d);
  v.lp.setOnes();
  for (auto& s : v.soc) s(0) = 1.0;
  for (auto& m : v.sdp) m.setIdentity();
  return v;
}

double ConeVec::dot(const ConeVec& o) const {
  double r = lp.dot(o.lp);
  for (std::size_t i = 0; i < soc.size(); ++i) r += soc[i].dot(o.soc[i]);
  for (std::size_t i = 0; i < sdp.size(); ++i) r += sdp[i].cwiseProduct(o.sdp[i]).sum();
  return r;
}

ConeVec& ConeVec::axpy(double a, const ConeVec& x) {
  lp += a * x.lp;
  for (std::size_t i = 0; i < soc.size(); ++i) soc[i] += a * x.soc[i];
  for (std::size_t i = 0; i < sdp.size(); ++i) sdp[i] += a * x.sdp[i];
  return *this;
}

ConeVec& ConeVec::scale(double a) {
  lp *= a;
  for (auto& s : soc) s *= a;
  for (auto& m : sdp) m *= a;
  return *this;
}

ConeVec operator-(const ConeVec& a, const ConeVec& b) {
  ConeVec r = a;
  r.axpy(-1.0, b);
  return r;
}

ConeVec operator+(const ConeVec& a, const ConeVec& b) {
  ConeVec r = a;
  r.axpy(1.0, b);
  return r;
}

namespace {

SparseRow row_of(const AffineScalar& a) {
  std::map<int, double> merged;
  for (const auto& [var, coef] : a.terms) merged[var] += coef;
  SparseRow r;
  for (const auto& [var, coef] : merged)
    if (coef != 0.0) r.entries.emplace_back(var, coef);
  return r;
}

}  // namespace

CompiledProgram compile(const ConicProgram& p) {
  CompiledProgram cp;
  cp.n = p.num_vars;
  cp.c = p.objective;
  cp.dims.lp = static_cast<int>(p.nonneg.size());
  for (const auto& s : p.soc_constraints) cp.dims.soc.push_back(static_cast<int>(s.vector.size()) + 1);
  for (const auto& b : p.psd_blocks) cp.dims.sdp.push_back(b.size);
  cp.h = ConeVec::zeros(cp.dims);

  for (std::size_t i = 0; i < p.nonneg.size(); ++i) {
    cp.h.lp(static_cast<Eigen::Index>(i)) = p.nonneg[i].constant;
    cp.lp_rows.push_back(row_of(p.nonneg[i]));
  }
  for (std::size_t k = 0; k < p.soc_constraints.size(); ++k) {
    const auto& soc = p.soc_constraints[k];
    std::vector<SparseRow> rows;
    cp.h.soc[k](0) = soc.bound.constant;
    rows.push_back(row_of(soc.bound));
    for (std::size_t i = 0; i < soc.vector.size(); ++i) {
      cp.h.soc[k](static_cast<Eigen::Index>(i) + 1) = soc.vector[i].constant;
      rows.push_back(row_of(soc.vector[i]));
    }
    cp.soc_rows.push_back(std::move(rows));
  }
  for (std::size_t k = 0; k < p.psd_blocks.size(); ++k) {
    const auto& blk = p.psd_blocks[k];
    cp.h.sdp[k] = 0.5 * (blk.constant + blk.constant.transpose());
    std::map<int, std::map<std::pair<int, int>, double>> merged;
    for (const auto& [var, entries] : blk.coeffs) {
      auto& m = merged[var];
      for (const auto& e : entries) {
        m[{e.row, e.col}] += e.value;
        if (e.row != e.col) m[{e.col, e.row}] += e.value;
      }
    }
    std::vector<SdpTerm> terms;
    for (const auto& [var, m] : merged) {
      SdpTerm t{var, {}};
      for (const auto& [rc, v] : m)
        if (v != 0.0) t.entries.push_back({rc.first, rc.second, v});
      if (!t.entries.empty()) terms.push_back(std::move(t));
    }
    cp.sdp_terms.push_back(std::move(terms));
  }
  cp.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.equalities.size()));
  for (std::size_t i = 0; i < p.equalities.size(); ++i) {
    cp.a_rows.push_back(row_of(p.equalities[i]));
    cp.b(static_cast<Eigen::Index>(i)) = -p.equalities[i].constant;
  }
  return cp;
}

ConeVec CompiledProgram::apply_G(const Eigen::VectorXd& x) const {
  ConeVec r = ConeVec::zeros(dims);
  for (std::size_t i = 0; i < lp_rows.size(); ++i) r.lp(static_cast<Eigen::Index>(i)) = -lp_rows[i].dot(x);
  for (std::size_t k = 0; k < soc_rows.size(); ++k)
    for (std::size_t i = 0; i < soc_rows[k].size(); ++i)
      r.soc[k](static_cast<Eigen::Index>(i)) = -soc_rows[k][i].dot(x);
  for (std::size_t k = 0; k < sdp_terms.size(); ++k) {
    auto& m = r.sdp[k];
    for (const auto& t : sdp_terms[k]) {
      const double xv = x(t.var);
      if (xv == 0.0) continue;
      for (const auto& e : t.entries) m(e.row, e.col) -= xv * e.value;
    }
  }
  return r;
}

Eigen::VectorXd CompiledProgram::apply_Gt(const ConeVec& u) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < lp_rows.size(); ++i) {
    const double ui = u.lp(static_cast<Eigen::Index>(i));
    for (const auto& [j, a] : lp_rows[i].entries) r(j) -= a * ui;
  }
  for (std::size_t k = 0; k < soc_rows.size(); ++k)
    for (std::size_t i = 0; i < soc_rows[k].size(); ++i) {
      const double ui = u.soc[k](static_cast<Eigen::Index>(i));
      for (const auto& [j, a] : soc_rows[k][i].entries) r(j) -= a * ui;
    }
  for (std::size_t k = 0; k < sdp_terms.size(); ++k) {
    const auto& m = u.sdp[k];
    for (const auto& t : sdp_terms[k]) {
      double acc = 0.0;
      for (const auto& e : t.entries) acc += e.value * m(e.row, e.col);
      r(t.var) -= acc;
    }
  }
  return r;
}

Eigen::VectorXd CompiledProgram::apply_A(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(a_rows.size()));
  for (std::size_t i = 0; i < a_rows.size(); ++i) r(static_cast<Eigen::Index>(i)) = a_rows[i].dot(x);
  return r;
}

Eigen::VectorXd CompiledProgram::apply_At(const Eigen::VectorXd& y) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < a_rows.size(); ++i)
    for (const auto& [j, a] : a_rows[i].entries) r(j) += a * y(static_cast<Eigen::Index>(i));
  return r;
}

namespace {

double soc_jdot(const Eigen::VectorXd& u) {
  return u(0) * u(0) - u.tail(u.size() - 1).squaredNorm();
}

// Replaces the scaling of PSD block k by the one for the pair (s, z) given in
// the coordinates of the current scaling: the actual iterates are
// R s R^T and R^{-T} z R^{-1} (R = I on first use). Working in scaled
// coordinates keeps both factors well conditioned late in the run.
bool sdp_rescale(Scaling& sc, std::size_t k, const Eigen::MatrixXd& s, const Eigen::MatrixXd& z) {
  Eigen::LLT<Eigen::MatrixXd> ls(s);
  Eigen::LLT<Eigen::MatrixXd> lz(z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  const Eigen::MatrixXd L1 = ls.matrixL();
  const Eigen::MatrixXd M = lz.matrixU() * L1;
  // Eigenvalues of M^T M are lambda^2; in scaled coordinates they are all of
  // similar size, so squaring loses little and beats an SVD on cost.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.transpose() * M);
  if (es.info() != Eigen::Success) return false;
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if ((lam.array() <= 0.0).any() || !lam.allFinite()) return false;
  const Eigen::MatrixXd& V = es.eigenvectors();
  Eigen::MatrixXd R = L1 * V * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  // R^{-1} = Lambda^{1/2} V^T L1^{-1}
  Eigen::MatrixXd RinvT = V * lam.cwiseSqrt().asDiagonal();
  ls.matrixU().solveInPlace(RinvT);
  Eigen::MatrixXd Rinv = RinvT.transpose();
  if (sc.sdp_R[k].size() > 0) {
    R = sc.sdp_R[k] * R;
    Rinv = Rinv * sc.sdp_Rinv[k];
  }
  sc.sdp_P[k] = Rinv.transpose() * Rinv;
  sc.sdp_RRt[k] = R * R.transpose();
  sc.sdp_R[k] = std::move(R);
  sc.sdp_Rinv[k] = std::move(Rinv);
  sc.sdp_lambda[k] = lam;
  return true;
}

}  // namespace

bool advance(Scaling& sc, double step, const ConeVec& ds, const ConeVec& ds_scaled, const ConeVec& dz,
             const ConeVec& dz_scaled, ConeVec& s, ConeVec& z) {
  ConeVec s_next = s;
  ConeVec z_next = z;
  s_next.axpy(step, ds);
  z_next.axpy(step, dz);
  ConeVec head_s = s_next;
  ConeVec head_z = z_next;
  head_s.sdp.clear();
  head_z.sdp.clear();
  if (!interior(head_s) || !interior(head_z)) return false;

  Scaling trial = sc;
  for (std::size_t k = 0; k < s.sdp.size(); ++k) {
    Eigen::MatrixXd st = step * ds_scaled.sdp[k];
    Eigen::MatrixXd zt = step * dz_scaled.sdp[k];
    st.diagonal() += sc.sdp_lambda[k];
    zt.diagonal() += sc.sdp_lambda[k];
    if (!sdp_rescale(trial, k, st, zt)) return false;
  }
  sc = std::move(trial);
  s = std::move(s_next);
  z = std::move(z_next);
  return true;
}

bool compute_scaling(const Dims& d, const ConeVec& s, const ConeVec& z, Scaling& out, bool keep_sdp) {
  out.lambda = ConeVec::zeros(d);
  if (d.lp > 0) {
    if ((s.lp.array() <= 0.0).any() || (z.lp.array() <= 0.0).any()) return false;
    out.lp_w = (s.lp.array() / z.lp.array()).sqrt().matrix();
    out.lambda.lp = (s.lp.array() * z.lp.array()).sqrt().matrix();
  } else {
    out.lp_w.resize(0);
  }

  out.soc_W.clear();
  out.soc_Winv.clear();
  for (std::size_t k = 0; k < d.soc.size(); ++k) {
    const auto& sk = s.soc[k];
    const auto& zk = z.soc[k];
    const double sJs = soc_jdot(sk);
    const double zJz = soc_jdot(zk);
    if (sk(0) <= 0.0 || zk(0) <= 0.0 || sJs <= 0.0 || zJz <= 0.0) return false;
    const Eigen::Index m = sk.size();
    const Eigen::VectorXd sb = sk / std::sqrt(sJs);
    const Eigen::VectorXd zb = zk / std::sqrt(zJz);
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    Eigen::VectorXd wb = sb;
    wb(0) += zb(0);
    wb.tail(m - 1) -= zb.tail(m - 1);
    wb /= 2.0 * gamma;
    Eigen::VectorXd v = wb;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (wb(0) + 1.0));
    const double beta = std::pow(sJs / zJz, 0.25);
    Eigen::MatrixXd J = -Eigen::MatrixXd::Identity(m, m);
    J(0, 0) = 1.0;
    Eigen::MatrixXd W = beta * (2.0 * v * v.transpose() - J);
    Eigen::VectorXd Jv = v;
    Jv.tail(m - 1) *= -1.0;
    Eigen::MatrixXd Winv = (1.0 / beta) * (2.0 * Jv * Jv.transpose() - J);
    out.lambda.soc[k] = W * zk;
    out.soc_W.push_back(std::move(W));
    out.soc_Winv.push_back(std::move(Winv));
  }

  if (!keep_sdp) {
    out.sdp_R.clear();
    out.sdp_Rinv.clear();
    out.sdp_P.clear();
    out.sdp_RRt.clear();
    out.sdp_lambda.clear();
    for (std::size_t k = 0; k < d.sdp.size(); ++k) {
      out.sdp_R.emplace_back();
      out.sdp_Rinv.emplace_back();
      out.sdp_P.emplace_back();
      out.sdp_RRt.emplace_back();
      out.sdp_lambda.emplace_back();
      if (!sdp_rescale(out, k, s.sdp[k], z.sdp[k])) return false;
    }
  }
  for (std::size_t k = 0; k < d.sdp.size(); ++k) out.lambda.sdp[k] = out.sdp_lambda[k].asDiagonal();
  return true;
}

ConeVec Scaling::apply_W(const ConeVec& u) const {
  ConeVec r = u;
  r.lp = lp_w.cwiseProduct(u.lp);
  for (std::size_t k = 0; k < soc_W.size(); ++k) r.soc[k] = soc_W[k] * u.soc[k];
  for (std::size_t k = 0; k < sdp_R.size(); ++k) r.sdp[k] = sdp_R[k].transpose() * u.sdp[k] * sdp_R[k];
  return r;
}

ConeVec Scaling::apply_Wt(const ConeVec& u) const {
  ConeVec r = u;
  r.lp = lp_w.cwiseProduct(u.lp);
  for (std::size_t k = 0; k < soc_W.size(); ++k) r.soc[k] = soc_W[k] * u.soc[k];
  for (std::size_t k = 0; k < sdp_R.size(); ++k) r.sdp[k] = sdp_R[k] * u.sdp[k] * sdp_R[k].transpose();
  return r;
}

ConeVec Scaling::apply_Wt_inv(const ConeVec& u) const {
  ConeVec r = u;
  r.lp = u.lp.cwiseQuotient(lp_w);
  for (std::size_t k = 0; k < soc_Winv.size(); ++k) r.soc[k] = soc_Winv[k] * u.soc[k];
  for (std::size_t k = 0; k < sdp_Rinv.size(); ++k) r.sdp[k] = sdp_Rinv[k] * u.sdp[k] * sdp_Rinv[k].transpose();
  return r;
}

ConeVec Scaling::apply_WtW(const ConeVec& u) const {
  ConeVec r = u;
  r.lp = lp_w.array().square().matrix().cwiseProduct(u.lp);
  for (std::size_t k = 0; k < soc_W.size(); ++k) r.soc[k] = soc_W[k] * (soc_W[k] * u.soc[k]);
  for (std::size_t k = 0; k < sdp_R.size(); ++k) r.sdp[k] = sdp_RRt[k] * u.sdp[k] * sdp_RRt[k];
  return r;
}

ConeVec Scaling::apply_WtW_inv(const ConeVec& u) const {
  ConeVec r = u;
  r.lp = u.lp.cwiseQuotient(lp_w.array().square().matrix());
  for (std::size_t k = 0; k < soc_Winv.size(); ++k) r.soc[k] = soc_Winv[k] * (soc_Winv[k] * u.soc[k]);
  for (std::size_t k = 0; k < sdp_P.size(); ++k) r.sdp[k] = sdp_P[k] * u.sdp[k] * sdp_P[k];
  return r;
}

ConeVec jordan_product(const ConeVec& u, const ConeVec& v) {
  ConeVec r = u;
  r.lp = u.lp.cwiseProduct(v.lp);
  for (std::size_t k = 0; k < u.soc.size(); ++k) {
    const auto& a = u.soc[k];
    const auto& b = v.soc[k];
    const Eigen::Index m = a.size();
    r.soc[k](0) = a.dot(b);
    r.soc[k].tail(m - 1) = a(0) * b.tail(m - 1) + b(0) * a.tail(m - 1);
  }
  for (std::size_t k = 0; k < u.sdp.size(); ++k) {
    const Eigen::MatrixXd uv = u.sdp[k] * v.sdp[k];
    r.sdp[k] = 0.5 * (uv + uv.transpose());
  }
  return r;
}

ConeVec jordan_divide(const Scaling& sc, const ConeVec& v) {
  ConeVec r = v;
  r.lp = v.lp.cwiseQuotient(sc.lambda.lp);
  for (std::size_t k = 0; k < v.soc.size(); ++k) {
    const auto& l = sc.lambda.soc[k];
    const auto& b = v.soc[k];
    const Eigen::Index m = l.size();
    const double det = soc_jdot(l);
    const double x0 = (l(0) * b(0) - l.tail(m - 1).dot(b.tail(m - 1))) / det;
    r.soc[k](0) = x0;
    r.soc[k].tail(m - 1) = (b.tail(m - 1) - x0 * l.tail(m - 1)) / l(0);
  }
  for (std::size_t k = 0; k < v.sdp.size(); ++k) {
    const auto& lam = sc.sdp_lambda[k];
    auto& m = r.sdp[k];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = 2.0 * v.sdp[k](i, j) / (lam(i) + lam(j));
  }
  return r;
}

namespace {

double soc_max_step(const Eigen::VectorXd& l, const Eigen::VectorXd& d) {
  // Smallest positive root of (l0 + t d0)^2 - ||l1 + t d1||^2, normalised by
  // the J-norm of l for conditioning.
  const Eigen::Index m = l.size();
  const double nl = std::sqrt(soc_jdot(l));
  const Eigen::VectorXd ln = l / nl;
  const Eigen::VectorXd dn = d / nl;
  const double a = dn(0) * dn(0) - dn.tail(m - 1).squaredNorm();
  const double b = 2.0 * (ln(0) * dn(0) - ln.tail(m - 1).dot(dn.tail(m - 1)));
  const double c = 1.0;
  double best = kInf;
  auto consider = [&](double t) {
    if (t > 0.0 && t < best) best = t;
  };
  if (std::abs(a) < 1e-14 * std::max(1.0, std::abs(b))) {
    if (b < 0.0) consider(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
      if (q != 0.0) {
        consider(q / a);
        consider(c / q);
      }
    }
  }
  return best;
}

}  // namespace

double max_step_scaled(const Scaling& sc, const ConeVec& d) {
  double best = kInf;
  for (Eigen::Index i = 0; i < d.lp.size(); ++i)
    if (d.lp(i) < 0.0) best = std::min(best, -sc.lambda.lp(i) / d.lp(i));
  for (std::size_t k = 0; k < d.soc.size(); ++k) best = std::min(best, soc_max_step(sc.lambda.soc[k], d.soc[k]));
  for (std::size_t k = 0; k < d.sdp.size(); ++k) {
    const Eigen::VectorXd isq = sc.sdp_lambda[k].array().rsqrt().matrix();
    const Eigen::MatrixXd M = isq.asDiagonal() * d.sdp[k] * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const double mu = es.eigenvalues()(0);
    if (mu < 0.0) best = std::min(best, -1.0 / mu);
  }
  return best;
}

bool interior(const ConeVec& u) {
  if (u.lp.size() > 0 && !(u.lp.array() > 0.0).all()) return false;
  for (const auto& s : u.soc)
    if (!(s(0) > 0.0) || !(soc_jdot(s) > 0.0)) return false;
  for (const auto& m : u.sdp) {
    Eigen::LLT<Eigen::MatrixXd> l(m);
    if (l.info() != Eigen::Success) return false;
  }
  return true;
}

double boundary_shift(const ConeVec& u) {
  double t = -kInf;
  if (u.lp.size() > 0) t = std::max(t, -u.lp.minCoeff());
  for (const auto& s : u.soc) t = std::max(t, s.tail(s.size() - 1).norm() - s(0));
  for (const auto& m : u.sdp) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    t = std::max(t, -es.eigenvalues()(0));
  }
  return t;
}

}  // namespace rfl::conic::detail
