#include <rfl/robust_lmi.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rfl {

namespace {

double min_eig(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void merge_terms(std::vector<std::pair<int, cplx>>& t) {
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, cplx>> out;
  for (const auto& e : t) {
    if (!out.empty() && out.back().first == e.first)
      out.back().second += e.second;
    else
      out.push_back(e);
  }
  std::erase_if(out, [](const auto& e) { return e.second == cplx(0.0); });
  t = std::move(out);
}

}  // namespace

cplx CAffine::evaluate(const RVec& x) const {
  cplx v = constant;
  for (const auto& [j, a] : terms) v += a * x(j);
  return v;
}

CAffine CAffine::conj() const {
  CAffine r;
  r.constant = std::conj(constant);
  r.terms.reserve(terms.size());
  for (const auto& [j, a] : terms) r.terms.emplace_back(j, std::conj(a));
  return r;
}

conic::AffineScalar CAffine::real() const {
  conic::AffineScalar s(constant.real());
  for (const auto& [j, a] : terms) s.add(j, a.real());
  return s;
}

conic::AffineScalar CAffine::imag() const {
  conic::AffineScalar s(constant.imag());
  for (const auto& [j, a] : terms) s.add(j, a.imag());
  return s;
}

CAffine& CAffine::operator+=(const CAffine& o) {
  constant += o.constant;
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  merge_terms(terms);
  return *this;
}

CAffine& CAffine::operator-=(const CAffine& o) { return *this += -o; }

CAffine& CAffine::operator*=(cplx s) {
  constant *= s;
  for (auto& t : terms) t.second *= s;
  merge_terms(terms);
  return *this;
}

CAffine operator+(CAffine a, const CAffine& b) { return a += b; }
CAffine operator-(CAffine a, const CAffine& b) { return a -= b; }
CAffine operator-(CAffine a) { return a *= -1.0; }
CAffine operator*(CAffine a, cplx s) { return a *= s; }
CAffine operator*(cplx s, CAffine a) { return a *= s; }

CAffine operator*(const CAffine& a, const CAffine& b) {
  if (a.is_constant()) return b * a.constant;
  if (b.is_constant()) return a * b.constant;
  throw BilinearityError("product of two variable expressions");
}

CAffineVec constant_vec(const CVec& v) {
  CAffineVec r;
  r.reserve(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) r.emplace_back(v(i));
  return r;
}

CAffineVec variable_vec(int first, int n) {
  CAffineVec r;
  r.reserve(n);
  for (int i = 0; i < n; ++i) r.push_back(CAffine::variable(first + 2 * i, first + 2 * i + 1));
  return r;
}

CAffine inner(const CAffineVec& x, const CAffineVec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("inner: dimension mismatch");
  CAffine s;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i].conj() * y[i];
  return s;
}

CVec evaluate(const CAffineVec& v, const RVec& x) {
  CVec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i].evaluate(x);
  return r;
}

void AffineCMatrix::add(int r, int c, const CAffine& e) {
  if (r < 0 || r >= rows || c < 0 || c >= cols) throw std::out_of_range("AffineCMatrix::add");
  constant(r, c) += e.constant;
  for (const auto& [j, a] : e.terms) {
    auto it = coeffs.find(j);
    if (it == coeffs.end()) it = coeffs.emplace(j, CMat::Zero(rows, cols)).first;
    it->second(r, c) += a;
  }
}

CAffine AffineCMatrix::entry(int r, int c) const {
  CAffine e(constant(r, c));
  for (const auto& [j, m] : coeffs)
    if (m(r, c) != cplx(0.0)) e.terms.emplace_back(j, m(r, c));
  return e;
}

CMat AffineCMatrix::evaluate(const RVec& x) const {
  CMat m = constant;
  for (const auto& [j, f] : coeffs) m += x(j) * f;
  return m;
}

AffineCMatrix AffineCMatrix::adjoint() const {
  AffineCMatrix r(cols, rows);
  r.constant = constant.adjoint();
  for (const auto& [j, f] : coeffs) r.coeffs.emplace(j, f.adjoint());
  return r;
}

double AffineCMatrix::hermitian_defect() const {
  if (rows != cols) return std::numeric_limits<double>::infinity();
  double d = (constant - constant.adjoint()).cwiseAbs().maxCoeff();
  for (const auto& [j, f] : coeffs) d = std::max(d, (f - f.adjoint()).cwiseAbs().maxCoeff());
  return d;
}

CMat schur_assemble(const CMat& A, const CMat& B, const CMat& C) {
  if (A.rows() != A.cols() || C.rows() != C.cols() || B.rows() != C.rows() || B.cols() != A.rows())
    throw std::invalid_argument("schur_assemble: dimension mismatch");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = C.rows();
  CMat D(n + m, n + m);
  D.topLeftCorner(n, n) = A;
  D.topRightCorner(n, m) = B.adjoint();
  D.bottomLeftCorner(m, n) = B;
  D.bottomRightCorner(m, m) = C;
  return D;
}

SchurCheck schur_psd_check(const CMat& A, const CMat& B, const CMat& C, double tol) {
  SchurCheck r;
  r.block_min_eig = min_eig(schur_assemble(A, B, C));
  const CMat comp = A - B.adjoint() * C.fullPivLu().solve(B);
  r.complement_min_eig = min_eig(comp);
  r.block_psd = r.block_min_eig >= -tol;
  r.complement_psd = r.complement_min_eig >= -tol;
  return r;
}

CMat robust_quadratic_at(const RobustQuadratic& rq, const RVec& vars, const CVec& x) {
  const CMat A = rq.A.evaluate(vars);
  const CMat B = rq.B.evaluate(vars);
  const CMat t = B.adjoint() * x * rq.c.adjoint();
  return A - t - t.adjoint();
}

LmiBlock lemma2_lmi(const RobustQuadratic& rq, int lambda_var) {
  const int n = rq.A.rows;
  const int m = rq.B.rows;
  if (rq.A.cols != n || rq.B.cols != n || rq.c.size() != n)
    throw std::invalid_argument("lemma2_lmi: dimension mismatch");
  if (rq.radius < 0.0) throw std::invalid_argument("lemma2_lmi: negative radius");
  LmiBlock blk(n + m, n + m);
  const CMat ccH = rq.c * rq.c.adjoint();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      blk.add(i, j, rq.A.entry(i, j));
      if (ccH(i, j) != cplx(0.0)) blk.add(i, j, CAffine::real_variable(lambda_var) * (-ccH(i, j)));
    }
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) {
      const CAffine e = rq.B.entry(r, c) * (-rq.radius);
      blk.add(n + r, c, e);
      blk.add(c, n + r, e.conj());
    }
  for (int r = 0; r < m; ++r) blk.add(n + r, n + r, CAffine::real_variable(lambda_var));
  return blk;
}

CVec lemma2_witness(const CMat& B, const CVec& c, double radius, const CVec& d) {
  const CVec u = B * d;
  const double un = u.norm();
  if (un == 0.0) {
    CVec x = CVec::Zero(B.rows());
    if (x.size() > 0) x(0) = radius;
    return x;
  }
  const cplx s = c.dot(d);  // c^H d
  const double phase = (s == cplx(0.0)) ? 0.0 : -std::arg(s);
  return (radius / un) * std::polar(1.0, phase) * u;
}

CVec lemma2_worst_point(const CMat& A, const CMat& B, const CVec& c, double radius, int iters) {
  auto F = [&](const CVec& x) {
    const CMat t = B.adjoint() * x * c.adjoint();
    return CMat(A - t - t.adjoint());
  };
  CVec best = CVec::Zero(B.rows());
  double best_eig = min_eig(F(best));
  CVec x = best;
  for (int it = 0; it < iters; ++it) {
    const CMat f = F(x);
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (f + f.adjoint()));
    x = lemma2_witness(B, c, radius, es.eigenvectors().col(0));
    const double e = min_eig(F(x));
    if (e < best_eig) {
      best_eig = e;
      best = x;
    }
  }
  return best;
}

LmiBlock uplink_robust_lmi(const UplinkLmiSpec& s) {
  const int n = static_cast<int>(s.z.size());
  if (s.h_hat.size() != n) throw std::invalid_argument("uplink_robust_lmi: dimension mismatch");
  const CAffineVec h = constant_vec(s.h_hat);
  LmiBlock blk(n + 2, n + 2);

  CAffine top = CAffine::real_variable(s.rho_var) - CAffine::real_variable(s.alpha_var);
  if (s.stage == Stage::sparsity) top += CAffine::real_variable(s.chi_var);
  blk.add(0, 0, top);
  blk.add(0, 1, s.b.conj() * inner(h, s.z) - 1.0);
  blk.add(1, 0, s.b * inner(s.z, h) - 1.0);
  blk.add(1, 1, 1.0);
  for (int j = 0; j < n; ++j) {
    blk.add(1, 2 + j, s.b * s.z[j].conj() * s.eps);
    blk.add(2 + j, 1, s.b.conj() * s.z[j] * s.eps);
    blk.add(2 + j, 2 + j, CAffine::real_variable(s.alpha_var));
  }
  return blk;
}

LmiBlock downlink_robust_lmi(const DownlinkLmiSpec& s) {
  const int n = static_cast<int>(s.w.size());
  if (s.h_hat.size() != n) throw std::invalid_argument("downlink_robust_lmi: dimension mismatch");
  const CAffineVec h = constant_vec(s.h_hat);
  LmiBlock blk(n + 2, n + 2);

  blk.add(0, 0, CAffine::real_variable(s.theta_var) - CAffine::real_variable(s.beta_var));
  blk.add(0, 1, s.v * inner(h, s.w) - 1.0);
  blk.add(1, 0, s.v.conj() * inner(s.w, h) - 1.0);
  blk.add(1, 1, 1.0);
  // row eps conj(v) w^H, column eps v w
  for (int j = 0; j < n; ++j) {
    blk.add(1, 2 + j, s.v.conj() * s.w[j].conj() * s.eps);
    blk.add(2 + j, 1, s.v * s.w[j] * s.eps);
    blk.add(2 + j, 2 + j, CAffine::real_variable(s.beta_var));
  }
  return blk;
}

conic::SocConstraint uplink_direct_constraint(const UplinkLmiSpec& s) {
  if (static_cast<int>(s.h_hat.size()) != static_cast<int>(s.z.size()))
    throw std::invalid_argument("uplink_direct_constraint: dimension mismatch");
  const CAffine r = s.b * inner(s.z, constant_vec(s.h_hat)) - 1.0;
  conic::AffineScalar bound;
  bound.add(s.rho_var, 1.0);
  if (s.stage == Stage::sparsity) bound.add(s.chi_var, 1.0);
  return conic::rotated_cone({r.real(), r.imag()}, bound, conic::AffineScalar(1.0));
}

conic::SocConstraint downlink_direct_constraint(const DownlinkLmiSpec& s) {
  if (static_cast<int>(s.h_hat.size()) != static_cast<int>(s.w.size()))
    throw std::invalid_argument("downlink_direct_constraint: dimension mismatch");
  const CAffine r = s.v * inner(constant_vec(s.h_hat), s.w) - 1.0;
  conic::AffineScalar bound;
  bound.add(s.theta_var, 1.0);
  return conic::rotated_cone({r.real(), r.imag()}, bound, conic::AffineScalar(1.0));
}

double QuadraticForm::operator()(const CVec& x) const {
  return (x.dot(A * x)).real() + 2.0 * b.dot(x).real() + c;
}

LmiBlock s_procedure_lmi(const QuadraticForm& f1, const QuadraticForm& f2, int tau_var) {
  const Eigen::Index n = f1.A.rows();
  if (f1.A.cols() != n || f2.A.rows() != n || f2.A.cols() != n || f1.b.size() != n || f2.b.size() != n)
    throw std::invalid_argument("s_procedure_lmi: dimension mismatch");
  auto homog = [n](const QuadraticForm& f) {
    CMat m(n + 1, n + 1);
    m.topLeftCorner(n, n) = f.A;
    m.topRightCorner(n, 1) = f.b;
    m.bottomLeftCorner(1, n) = f.b.adjoint();
    m(n, n) = f.c;
    return m;
  };
  LmiBlock blk(homog(f2) * -1.0);
  blk.coeffs.emplace(tau_var, homog(f1));
  return blk;
}

RMat hermitian_to_real(const CMat& m) {
  const Eigen::Index n = m.rows();
  RMat r(2 * n, 2 * n);
  r.topLeftCorner(n, n) = m.real();
  r.topRightCorner(n, n) = -m.imag();
  r.bottomLeftCorner(n, n) = m.imag();
  r.bottomRightCorner(n, n) = m.real();
  return r;
}

conic::PsdConstraint hermitian_to_real(const LmiBlock& blk, double herm_tol) {
  if (blk.rows != blk.cols) throw std::invalid_argument("hermitian_to_real: block not square");
  if (blk.hermitian_defect() > herm_tol)
    throw std::invalid_argument("hermitian_to_real: block is not Hermitian");
  conic::PsdConstraint p;
  p.size = 2 * blk.rows;
  const CMat c = 0.5 * (blk.constant + blk.constant.adjoint());
  p.constant = hermitian_to_real(c);
  for (const auto& [j, f] : blk.coeffs) {
    const CMat fh = 0.5 * (f + f.adjoint());
    const RMat e = hermitian_to_real(fh);
    std::vector<conic::SymmetricEntry> entries;
    for (int col = 0; col < p.size; ++col)
      for (int row = 0; row <= col; ++row)
        if (e(row, col) != 0.0) entries.push_back({row, col, e(row, col)});
    if (!entries.empty()) p.coeffs.emplace_back(j, std::move(entries));
  }
  return p;
}

void add_lmi(conic::ConicProgram& p, const LmiBlock& blk) {
  p.psd_blocks.push_back(hermitian_to_real(blk));
}

std::string to_string(const LmiBlock& blk) {
  std::ostringstream os;
  os << "LMI " << blk.rows << "x" << blk.cols << "\nconstant:\n" << blk.constant << "\n";
  for (const auto& [j, f] : blk.coeffs) os << "x[" << j << "]:\n" << f << "\n";
  return os.str();
}

}  // namespace rfl
