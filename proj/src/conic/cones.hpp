#pragma once

// Cone algebra used by the interior-point backend. Cone vectors are kept in
// structured form: a block for the nonnegative orthant, one vector per
// second-order cone (first entry is the bound), one symmetric matrix per PSD
// block. Inner products are Euclidean / trace.

#include <rfl/conic/program.hpp>

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace rfl::conic::detail {

struct Dims {
  int lp = 0;
  std::vector<int> soc;
  std::vector<int> sdp;

  [[nodiscard]] int degree() const;
};

struct ConeVec {
  Eigen::VectorXd lp;
  std::vector<Eigen::VectorXd> soc;
  std::vector<Eigen::MatrixXd> sdp;

  static ConeVec zeros(const Dims& d);
  static ConeVec identity(const Dims& d);

  [[nodiscard]] double dot(const ConeVec& o) const;
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  ConeVec& axpy(double a, const ConeVec& x);
  ConeVec& scale(double a);
};

ConeVec operator-(const ConeVec& a, const ConeVec& b);
ConeVec operator+(const ConeVec& a, const ConeVec& b);

struct SparseRow {
  std::vector<std::pair<int, double>> entries;
  [[nodiscard]] double dot(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& [j, a] : entries) v += a * x(j);
    return v;
  }
};

struct FullEntry {
  int row;
  int col;
  double value;
};

struct SdpTerm {
  int var;
  std::vector<FullEntry> entries;  // both triangles
};

/// Program in the form  s = h + F x ∈ K,  A x = b,  minimize c^T x.
/// The solver's standard form uses G = -F.
struct CompiledProgram {
  int n = 0;
  Dims dims;
  Eigen::VectorXd c;
  ConeVec h;
  std::vector<SparseRow> lp_rows;
  std::vector<std::vector<SparseRow>> soc_rows;
  std::vector<std::vector<SdpTerm>> sdp_terms;
  std::vector<SparseRow> a_rows;
  Eigen::VectorXd b;

  [[nodiscard]] ConeVec apply_G(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd apply_Gt(const ConeVec& u) const;
  [[nodiscard]] Eigen::VectorXd apply_A(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd apply_At(const Eigen::VectorXd& y) const;
};

CompiledProgram compile(const ConicProgram& p);

/// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  Eigen::VectorXd lp_w;  // W = diag(lp_w)
  std::vector<Eigen::MatrixXd> soc_W;
  std::vector<Eigen::MatrixXd> soc_Winv;
  std::vector<Eigen::MatrixXd> sdp_R;     // W(u) = R^T u R
  std::vector<Eigen::MatrixXd> sdp_Rinv;
  std::vector<Eigen::MatrixXd> sdp_P;     // R^{-T} R^{-1}
  std::vector<Eigen::MatrixXd> sdp_RRt;
  ConeVec lambda;                          // PSD parts are diagonal
  std::vector<Eigen::VectorXd> sdp_lambda;

  [[nodiscard]] ConeVec apply_W(const ConeVec& u) const;
  [[nodiscard]] ConeVec apply_Wt(const ConeVec& u) const;
  [[nodiscard]] ConeVec apply_WtW(const ConeVec& u) const;
  [[nodiscard]] ConeVec apply_WtW_inv(const ConeVec& u) const;
  [[nodiscard]] ConeVec apply_Wt_inv(const ConeVec& u) const;
};

/// Returns false when s or z is not strictly interior. With keep_sdp the PSD
/// part of `out` is left as is (already updated by advance()).
bool compute_scaling(const Dims& d, const ConeVec& s, const ConeVec& z, Scaling& out,
                     bool keep_sdp = false);

/// s += step ds, z += step dz. The PSD scalings are updated from the scaled
/// directions (the iterates in scaled coordinates stay well conditioned).
/// Returns false, leaving everything untouched, when the step leaves the
/// cone interior.
bool advance(Scaling& sc, double step, const ConeVec& ds, const ConeVec& ds_scaled, const ConeVec& dz,
             const ConeVec& dz_scaled, ConeVec& s, ConeVec& z);

/// Jordan product u ∘ v (PSD: (uv + vu)/2).
ConeVec jordan_product(const ConeVec& u, const ConeVec& v);

/// Solves lambda ∘ x = v for x where lambda is the scaled point (PSD parts
/// diagonal, given by sc.sdp_lambda).
ConeVec jordan_divide(const Scaling& sc, const ConeVec& v);

/// Largest t such that lambda + t d stays in the cone (lambda interior,
/// PSD parts diagonal). Returns +inf when unbounded.
double max_step_scaled(const Scaling& sc, const ConeVec& d);

/// True when every block of u is strictly inside its cone.
bool interior(const ConeVec& u);

/// Smallest t with u + t e on the cone boundary, i.e. -(min "eigenvalue").
double boundary_shift(const ConeVec& u);

}  // namespace rfl::conic::detail
