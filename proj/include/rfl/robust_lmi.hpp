#pragma once

// Complex affine modeling on top of the real conic IR. Complex decision
// values are pairs of real variables (re, im); products are only allowed
// when at least one factor is constant, which is how the alternating
// subproblems stay convex.

#include <rfl/common.hpp>
#include <rfl/conic/program.hpp>

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfl {

/// Product of two expressions that both depend on decision variables.
class BilinearityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// constant + sum_j coef_j * x[var_j] with real x and complex coefficients.
struct CAffine {
  cplx constant{0.0, 0.0};
  std::vector<std::pair<int, cplx>> terms;

  CAffine() = default;
  CAffine(cplx c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  CAffine(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)

  static CAffine variable(int re, int im) {
    CAffine a;
    a.terms = {{re, cplx(1.0, 0.0)}, {im, cplx(0.0, 1.0)}};
    return a;
  }
  static CAffine real_variable(int var, double coef = 1.0) {
    CAffine a;
    a.terms = {{var, cplx(coef, 0.0)}};
    return a;
  }

  [[nodiscard]] bool is_constant() const { return terms.empty(); }
  [[nodiscard]] cplx evaluate(const RVec& x) const;
  [[nodiscard]] CAffine conj() const;
  [[nodiscard]] conic::AffineScalar real() const;
  [[nodiscard]] conic::AffineScalar imag() const;

  CAffine& operator+=(const CAffine& o);
  CAffine& operator-=(const CAffine& o);
  CAffine& operator*=(cplx s);
};

CAffine operator+(CAffine a, const CAffine& b);
CAffine operator-(CAffine a, const CAffine& b);
CAffine operator-(CAffine a);
CAffine operator*(CAffine a, cplx s);
CAffine operator*(cplx s, CAffine a);
inline CAffine operator*(CAffine a, double s) { return std::move(a) * cplx(s); }
inline CAffine operator*(double s, CAffine a) { return std::move(a) * cplx(s); }
/// Throws BilinearityError when neither factor is constant.
CAffine operator*(const CAffine& a, const CAffine& b);

using CAffineVec = std::vector<CAffine>;

CAffineVec constant_vec(const CVec& v);
/// Complex vector of n fresh variables starting at real index `first`
/// (layout re0, im0, re1, im1, ...).
CAffineVec variable_vec(int first, int n);
/// x^H y with the same bilinearity rule as operator*.
CAffine inner(const CAffineVec& x, const CAffineVec& y);
CVec evaluate(const CAffineVec& v, const RVec& x);

/// rows x cols complex matrix affine in real variables.
struct AffineCMatrix {
  int rows = 0;
  int cols = 0;
  CMat constant;
  std::map<int, CMat> coeffs;

  AffineCMatrix() = default;
  AffineCMatrix(int r, int c) : rows(r), cols(c), constant(CMat::Zero(r, c)) {}
  explicit AffineCMatrix(const CMat& m) : rows(int(m.rows())), cols(int(m.cols())), constant(m) {}

  [[nodiscard]] int size() const { return rows; }
  void add(int r, int c, const CAffine& e);
  [[nodiscard]] CAffine entry(int r, int c) const;
  [[nodiscard]] CMat evaluate(const RVec& x) const;
  [[nodiscard]] AffineCMatrix adjoint() const;
  /// Max |M - M^H| over the constant and every coefficient.
  [[nodiscard]] double hermitian_defect() const;
};

/// Square Hermitian affine block that must be PSD.
using LmiBlock = AffineCMatrix;

/// Schur block [[A, B^H], [B, C]].
CMat schur_assemble(const CMat& A, const CMat& B, const CMat& C);

struct SchurCheck {
  double block_min_eig = 0.0;
  double complement_min_eig = 0.0;
  bool block_psd = false;
  bool complement_psd = false;
};
/// Compares D >= 0 with A - B^H C^{-1} B >= 0 (C must be positive definite).
SchurCheck schur_psd_check(const CMat& A, const CMat& B, const CMat& C, double tol = 1e-9);

/// F(x) = A - B^H x c^H - c x^H B >= 0 for all ||x|| <= radius.
/// A is n x n Hermitian, B is m x n, c has length n.
struct RobustQuadratic {
  AffineCMatrix A;
  AffineCMatrix B;
  CVec c;
  double radius = 0.0;
};

CMat robust_quadratic_at(const RobustQuadratic& rq, const RVec& vars, const CVec& x);

/// [[A - lambda c c^H, -radius B^H], [-radius B, lambda I_m]]; lambda >= 0 is
/// the caller's responsibility.
LmiBlock lemma2_lmi(const RobustQuadratic& rq, int lambda_var);

/// Ball point minimising d^H F(x) d for the given direction d.
CVec lemma2_witness(const CMat& B, const CVec& c, double radius, const CVec& d);
/// Alternates witness / min-eigenvector a few times to find a bad point.
CVec lemma2_worst_point(const CMat& A, const CMat& B, const CVec& c, double radius, int iters = 8);

enum class Stage { sparsity, feasibility };

/// Robust uplink term: (|z^H h b - 1| + eps |b| ||z||)^2 <= rho (+ chi).
/// Exactly one of b, z may be variable.
struct UplinkLmiSpec {
  CAffine b;
  CAffineVec z;
  CVec h_hat;
  double eps = 0.0;
  int rho_var = -1;
  int chi_var = -1;  // used only in the sparsity stage
  int alpha_var = -1;
  Stage stage = Stage::sparsity;
};

/// Robust downlink term: (|v h^H w - 1| + eps |v| ||w||)^2 <= theta.
struct DownlinkLmiSpec {
  CAffine v;
  CAffineVec w;
  CVec h_hat;
  double eps = 0.0;
  int theta_var = -1;
  int beta_var = -1;
};

LmiBlock uplink_robust_lmi(const UplinkLmiSpec& s);
LmiBlock downlink_robust_lmi(const DownlinkLmiSpec& s);

/// The same constraints when eps = 0: |residual|^2 <= bound as a rotated cone.
conic::SocConstraint uplink_direct_constraint(const UplinkLmiSpec& s);
conic::SocConstraint downlink_direct_constraint(const DownlinkLmiSpec& s);

/// f(x) = x^H A x + 2 Re(b^H x) + c
struct QuadraticForm {
  CMat A;
  CVec b;
  double c = 0.0;

  [[nodiscard]] double operator()(const CVec& x) const;
};

/// tau [[A1, b1], [b1^H, c1]] - [[A2, b2], [b2^H, c2]] >= 0 with tau >= 0
/// certifies f1(x) <= 0 => f2(x) <= 0.
LmiBlock s_procedure_lmi(const QuadraticForm& f1, const QuadraticForm& f2, int tau_var);

/// [[Re M, -Im M], [Im M, Re M]]
RMat hermitian_to_real(const CMat& m);
/// Real symmetric embedding of an affine Hermitian block, ready for the conic IR.
conic::PsdConstraint hermitian_to_real(const LmiBlock& blk, double herm_tol = 1e-10);

void add_lmi(conic::ConicProgram& p, const LmiBlock& blk);

std::string to_string(const LmiBlock& blk);

}  // namespace rfl
