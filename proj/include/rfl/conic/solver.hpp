#pragma once

#include <rfl/conic/program.hpp>

#include <memory>
#include <string>
#include <vector>

namespace rfl::conic {

enum class SolveStatus { optimal, infeasible, numerical_failure };

std::string to_string(SolveStatus s);

struct SolverSettings {
  double tol = 1e-7;
  /// Iteration budget; exhausting it while the iterates drift towards an
  /// infeasibility certificate reports `infeasible`.
  int max_iterations = 200;
  bool verbose = false;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  double objective_value = 0.0;
  double max_constraint_violation = 0.0;
  int iterations = 0;
  std::string message;

  [[nodiscard]] bool optimal() const { return status == SolveStatus::optimal; }
};

/// Per-cone constraint violations at a point. Positive entries are
/// violations, nonpositive entries mean the constraint holds.
struct ViolationReport {
  std::vector<double> psd;       // -lambda_min of each block
  std::vector<double> soc;       // ||v|| - bound
  std::vector<double> nonneg;    // -expr
  std::vector<double> equality;  // |expr|

  [[nodiscard]] double max_violation() const;
};

/// Eigenvalue-based check, independent of any backend.
ViolationReport verify_solution(const ConicProgram& p, const Eigen::VectorXd& x);

class Backend {
 public:
  virtual ~Backend() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual ConicSolution solve(const ConicProgram& p,
                                            const SolverSettings& settings) const = 0;
};

/// Homogeneous self-dual primal-dual interior-point method with
/// Nesterov-Todd scaling and Mehrotra correction.
class InteriorPointBackend final : public Backend {
 public:
  [[nodiscard]] std::string name() const override { return "ipm-nt"; }
  [[nodiscard]] ConicSolution solve(const ConicProgram& p,
                                    const SolverSettings& settings) const override;
};

/// Validates the program, dispatches to `backend` (interior point when null)
/// and fills `max_constraint_violation` from verify_solution.
ConicSolution solve(const ConicProgram& p, const SolverSettings& settings = {},
                    const Backend* backend = nullptr);

}  // namespace rfl::conic
