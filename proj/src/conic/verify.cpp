#include <rfl/conic/solver.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rfl::conic {

double ViolationReport::max_violation() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto* v : {&psd, &soc, &nonneg, &equality})
    for (double x : *v) m = std::max(m, x);
  return std::isfinite(m) ? m : 0.0;
}

ViolationReport verify_solution(const ConicProgram& p, const Eigen::VectorXd& x) {
  if (x.size() != p.num_vars) throw StructuralError("verify_solution: point has wrong dimension");
  ViolationReport r;
  for (const auto& blk : p.psd_blocks) {
    const Eigen::MatrixXd m = blk.evaluate(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    r.psd.push_back(-es.eigenvalues()(0));
  }
  for (const auto& soc : p.soc_constraints) {
    double sq = 0.0;
    for (const auto& a : soc.vector) {
      const double v = a.evaluate(x);
      sq += v * v;
    }
    r.soc.push_back(std::sqrt(sq) - soc.bound.evaluate(x));
  }
  for (const auto& a : p.nonneg) r.nonneg.push_back(-a.evaluate(x));
  for (const auto& a : p.equalities) r.equality.push_back(std::abs(a.evaluate(x)));
  return r;
}

}  // namespace rfl::conic
