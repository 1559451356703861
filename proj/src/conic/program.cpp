#include <rfl/conic/program.hpp>

#include <cmath>
#include <sstream>

namespace rfl::conic {

AffineScalar& AffineScalar::add(const AffineScalar& other, double scale) {
  constant += scale * other.constant;
  for (const auto& [var, coef] : other.terms) add(var, scale * coef);
  return *this;
}

double AffineScalar::evaluate(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [var, coef] : terms) v += coef * x(var);
  return v;
}

Eigen::MatrixXd PsdConstraint::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd m = constant;
  for (const auto& [var, entries] : coeffs) {
    const double xv = x(var);
    if (xv == 0.0) continue;
    for (const auto& e : entries) {
      m(e.row, e.col) += xv * e.value;
      if (e.row != e.col) m(e.col, e.row) += xv * e.value;
    }
  }
  return m;
}

int ConicProgram::add_variable(std::string name) {
  const int idx = num_vars++;
  objective.conservativeResize(num_vars);
  objective(idx) = 0.0;
  if (!name.empty() || !var_names.empty()) {
    var_names.resize(num_vars);
    var_names[idx] = std::move(name);
  }
  return idx;
}

namespace {

void check_affine(const AffineScalar& a, int n, const char* where) {
  for (const auto& [var, coef] : a.terms) {
    if (var < 0 || var >= n) {
      std::ostringstream os;
      os << where << ": variable index " << var << " outside [0, " << n << ")";
      throw StructuralError(os.str());
    }
    if (!std::isfinite(coef)) throw StructuralError(std::string(where) + ": non-finite coefficient");
  }
  if (!std::isfinite(a.constant)) throw StructuralError(std::string(where) + ": non-finite constant");
}

}  // namespace

void validate(const ConicProgram& p, double symmetry_tol) {
  if (p.num_vars < 0) throw StructuralError("negative variable count");
  if (p.objective.size() != p.num_vars) throw StructuralError("objective length differs from num_vars");
  if (!p.objective.allFinite()) throw StructuralError("objective has non-finite entries");
  for (std::size_t b = 0; b < p.psd_blocks.size(); ++b) {
    const auto& blk = p.psd_blocks[b];
    if (blk.size <= 0 || blk.constant.rows() != blk.size || blk.constant.cols() != blk.size) {
      throw StructuralError("psd block " + std::to_string(b) + ": constant has wrong shape");
    }
    const double scale = std::max(1.0, blk.constant.cwiseAbs().maxCoeff());
    if ((blk.constant - blk.constant.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
      throw StructuralError("psd block " + std::to_string(b) + ": constant not symmetric");
    }
    for (const auto& [var, entries] : blk.coeffs) {
      if (var < 0 || var >= p.num_vars) {
        throw StructuralError("psd block " + std::to_string(b) + ": variable index out of range");
      }
      for (const auto& e : entries) {
        if (e.row < 0 || e.col < 0 || e.row >= blk.size || e.col >= blk.size || e.row > e.col) {
          throw StructuralError("psd block " + std::to_string(b) +
                                ": coefficient entry must lie in the upper triangle");
        }
      }
    }
  }
  for (const auto& soc : p.soc_constraints) {
    check_affine(soc.bound, p.num_vars, "soc bound");
    for (const auto& v : soc.vector) check_affine(v, p.num_vars, "soc vector");
  }
  for (const auto& a : p.nonneg) check_affine(a, p.num_vars, "nonneg");
  for (const auto& a : p.equalities) check_affine(a, p.num_vars, "equality");
}

namespace {

nlohmann::json affine_json(const AffineScalar& a) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [var, coef] : a.terms) terms.push_back({var, coef});
  return {{"constant", a.constant}, {"terms", terms}};
}

}  // namespace

nlohmann::json to_json(const ConicProgram& p) {
  nlohmann::json j;
  j["num_vars"] = p.num_vars;
  j["objective"] = std::vector<double>(p.objective.data(), p.objective.data() + p.objective.size());
  j["objective_offset"] = p.objective_offset;
  if (!p.var_names.empty()) j["var_names"] = p.var_names;
  auto& psd = j["psd_blocks"] = nlohmann::json::array();
  for (const auto& blk : p.psd_blocks) {
    nlohmann::json b;
    b["size"] = blk.size;
    std::vector<std::vector<double>> c(blk.size, std::vector<double>(blk.size));
    for (int r = 0; r < blk.size; ++r)
      for (int col = 0; col < blk.size; ++col) c[r][col] = blk.constant(r, col);
    b["constant"] = c;
    auto& coeffs = b["coeffs"] = nlohmann::json::array();
    for (const auto& [var, entries] : blk.coeffs) {
      nlohmann::json ents = nlohmann::json::array();
      for (const auto& e : entries) ents.push_back({e.row, e.col, e.value});
      coeffs.push_back({{"var", var}, {"upper_entries", ents}});
    }
    psd.push_back(std::move(b));
  }
  auto& soc = j["soc_constraints"] = nlohmann::json::array();
  for (const auto& s : p.soc_constraints) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& a : s.vector) v.push_back(affine_json(a));
    soc.push_back({{"vector", v}, {"bound", affine_json(s.bound)}});
  }
  auto& nn = j["nonneg"] = nlohmann::json::array();
  for (const auto& a : p.nonneg) nn.push_back(affine_json(a));
  auto& eq = j["equalities"] = nlohmann::json::array();
  for (const auto& a : p.equalities) eq.push_back(affine_json(a));
  return j;
}

SocConstraint rotated_cone(const std::vector<AffineScalar>& u, const AffineScalar& t,
                           const AffineScalar& r) {
  SocConstraint c;
  c.vector.reserve(u.size() + 1);
  for (const auto& ui : u) {
    AffineScalar twice;
    twice.add(ui, 2.0);
    c.vector.push_back(std::move(twice));
  }
  AffineScalar diff;
  diff.add(t, 1.0).add(r, -1.0);
  c.vector.push_back(std::move(diff));
  c.bound.add(t, 1.0).add(r, 1.0);
  return c;
}

}  // namespace rfl::conic
