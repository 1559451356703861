#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rfl::conic {

/// Raised when a program references variables out of range or carries
/// non-symmetric PSD data. Detected before any backend runs.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// constant + sum_i coef_i * x[var_i]
struct AffineScalar {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  AffineScalar() = default;
  explicit AffineScalar(double c) : constant(c) {}

  AffineScalar& add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  AffineScalar& add(const AffineScalar& other, double scale = 1.0);

  [[nodiscard]] double evaluate(const Eigen::VectorXd& x) const;
};

/// Upper-triangle entry (row <= col) of a symmetric coefficient matrix.
/// Off-diagonal entries implicitly mirror to (col, row).
struct SymmetricEntry {
  int row;
  int col;
  double value;
};

/// constant + sum_i x[var_i] * F_i  must be positive semidefinite.
struct PsdConstraint {
  int size = 0;
  Eigen::MatrixXd constant;
  std::vector<std::pair<int, std::vector<SymmetricEntry>>> coeffs;

  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
};

/// || vector || <= bound
struct SocConstraint {
  std::vector<AffineScalar> vector;
  AffineScalar bound;
};

/// Minimize objective^T x + objective_offset over affine PSD, second-order
/// cone, nonnegativity and equality constraints.
struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;
  double objective_offset = 0.0;
  std::vector<PsdConstraint> psd_blocks;
  std::vector<SocConstraint> soc_constraints;
  std::vector<AffineScalar> nonneg;
  std::vector<AffineScalar> equalities;
  std::vector<std::string> var_names;  // optional; used by dumps only

  explicit ConicProgram(int n = 0) : num_vars(n), objective(Eigen::VectorXd::Zero(n)) {}

  int add_variable(std::string name = {});
  [[nodiscard]] double objective_value(const Eigen::VectorXd& x) const {
    return objective.dot(x) + objective_offset;
  }
};

/// Throws StructuralError when indices are out of range or shapes disagree.
void validate(const ConicProgram& p, double symmetry_tol = 1e-12);

/// Debug dump: variables, objective and every cone block.
nlohmann::json to_json(const ConicProgram& p);

/// Rotated cone  ||u||^2 <= t * r  encoded as  ||(2u, t - r)|| <= t + r.
SocConstraint rotated_cone(const std::vector<AffineScalar>& u, const AffineScalar& t,
                           const AffineScalar& r);

}  // namespace rfl::conic
