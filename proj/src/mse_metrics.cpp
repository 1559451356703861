#include <rfl/mse_metrics.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfl {

namespace {

void check_dims(const CVec& a, const CVec& b, const char* where) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

void check_set(std::size_t n_b, std::size_t n_h, const char* where) {
  if (n_h == 0) throw std::invalid_argument(std::string(where) + ": empty device set");
  if (n_b != n_h) throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

cplx unit_phase(double angle) { return std::polar(1.0, angle); }

}  // namespace

TransceiverSet TransceiverSet::zeros(int num_antennas, int num_devices) {
  TransceiverSet t;
  t.w = CVec::Zero(num_antennas);
  t.z = CVec::Zero(num_antennas);
  t.v.assign(num_devices, cplx(0.0));
  t.b.assign(num_devices, cplx(0.0));
  return t;
}

double downlink_mse(cplx v, const CVec& w, const CVec& h, double noise_dl) {
  check_dims(w, h, "downlink_mse");
  return std::norm(v * h.dot(w) - 1.0) + noise_dl * std::norm(v);
}

double uplink_mse(const CVec& z, const std::vector<cplx>& b, const std::vector<CVec>& h,
                  double noise_ul) {
  check_set(b.size(), h.size(), "uplink_mse");
  double s = noise_ul * z.squaredNorm();
  for (std::size_t i = 0; i < h.size(); ++i) {
    check_dims(z, h[i], "uplink_mse");
    s += std::norm(z.dot(h[i]) * b[i] - 1.0);
  }
  return s;
}

double worst_case_downlink_mse(cplx v, const CVec& w, const CVec& h_hat, double eps,
                               double noise_dl) {
  check_dims(w, h_hat, "worst_case_downlink_mse");
  const double r = std::abs(v * h_hat.dot(w) - 1.0) + eps * std::abs(v) * w.norm();
  return r * r + noise_dl * std::norm(v);
}

double worst_case_uplink_mse(const CVec& z, const std::vector<cplx>& b,
                             const std::vector<CVec>& h_hat, const std::vector<double>& eps,
                             double noise_ul) {
  check_set(b.size(), h_hat.size(), "worst_case_uplink_mse");
  if (eps.size() != h_hat.size()) throw std::invalid_argument("worst_case_uplink_mse: radii size");
  const double zn = z.norm();
  double s = noise_ul * zn * zn;
  for (std::size_t i = 0; i < h_hat.size(); ++i) {
    check_dims(z, h_hat[i], "worst_case_uplink_mse");
    const double r = std::abs(z.dot(h_hat[i]) * b[i] - 1.0) + eps[i] * std::abs(b[i]) * zn;
    s += r * r;
  }
  return s;
}

CVec aligned_downlink_error(cplx v, const CVec& w, const CVec& h_hat, double eps) {
  check_dims(w, h_hat, "aligned_downlink_error");
  const Eigen::Index n = w.size();
  const double wn = w.norm();
  if (eps == 0.0 || n == 0) return CVec::Zero(n);
  if (wn == 0.0) {
    CVec e = CVec::Zero(n);
    e(0) = eps;
    return e;
  }
  // v e^H w = eps |v| ||w|| conj(phi) e^{i arg v}; match arg of a = v h^H w - 1
  const cplx a = v * h_hat.dot(w) - 1.0;
  const double phase = (a == cplx(0.0) ? 0.0 : std::arg(v) - std::arg(a));
  return (eps / wn) * unit_phase(phase) * w;
}

CVec aligned_uplink_error(const CVec& z, cplx b, const CVec& h_hat, double eps) {
  check_dims(z, h_hat, "aligned_uplink_error");
  const Eigen::Index n = z.size();
  const double zn = z.norm();
  if (eps == 0.0 || n == 0) return CVec::Zero(n);
  if (zn == 0.0) {
    CVec e = CVec::Zero(n);
    e(0) = eps;
    return e;
  }
  // z^H e b = eps ||z|| phi b; match arg of a = z^H h b - 1
  const cplx a = z.dot(h_hat) * b - 1.0;
  const double phase = (a == cplx(0.0) ? 0.0 : std::arg(a) - std::arg(b));
  return (eps / zn) * unit_phase(phase) * z;
}

double aggregation_target(const std::vector<double>& values, const std::vector<double>& sizes) {
  if (values.empty()) throw std::invalid_argument("aggregation_target: empty device set");
  if (values.size() != sizes.size()) throw std::invalid_argument("aggregation_target: size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(sizes[i] > 0.0)) throw std::invalid_argument("aggregation_target: sizes must be positive");
    num += sizes[i] * values[i];
    den += sizes[i];
  }
  return num / den;
}

MseReport evaluate_mse(const ChannelSet& ch, const TransceiverSet& tx,
                       const std::vector<int>& selected) {
  MseReport r;
  for (int k = 0; k < ch.num_devices; ++k) {
    r.downlink.push_back(worst_case_downlink_mse(tx.v[k], tx.w, ch.estimated[k], ch.radii[k], ch.noise_dl));
    r.nominal_downlink.push_back(downlink_mse(tx.v[k], tx.w, ch.estimated[k], ch.noise_dl));
  }
  if (!selected.empty()) {
    std::vector<cplx> b;
    std::vector<CVec> h;
    std::vector<double> eps;
    for (int i : selected) {
      b.push_back(tx.b[i]);
      h.push_back(ch.estimated[i]);
      eps.push_back(ch.radii[i]);
    }
    r.uplink = worst_case_uplink_mse(tx.z, b, h, eps, ch.noise_ul);
    r.nominal_uplink = uplink_mse(tx.z, b, h, ch.noise_ul);
  }
  return r;
}

MseReport realized_mse(const ChannelSet& ch, const TransceiverSet& tx,
                       const std::vector<int>& selected) {
  MseReport r;
  for (int k = 0; k < ch.num_devices; ++k)
    r.downlink.push_back(downlink_mse(tx.v[k], tx.w, ch.truth[k], ch.noise_dl));
  r.nominal_downlink = r.downlink;
  if (!selected.empty()) {
    std::vector<cplx> b;
    std::vector<CVec> h;
    for (int i : selected) {
      b.push_back(tx.b[i]);
      h.push_back(ch.truth[i]);
    }
    r.uplink = uplink_mse(tx.z, b, h, ch.noise_ul);
  }
  r.nominal_uplink = r.uplink;
  return r;
}

nlohmann::json to_json(const MseReport& r) {
  return {{"downlink", r.downlink},
          {"uplink", r.uplink},
          {"nominal_downlink", r.nominal_downlink},
          {"nominal_uplink", r.nominal_uplink}};
}

nlohmann::json to_json(const TransceiverSet& tx) {
  auto scalars = [](const std::vector<cplx>& s) {
    auto a = nlohmann::json::array();
    for (const auto& c : s) a.push_back({c.real(), c.imag()});
    return a;
  };
  return {{"w", cvec_to_json(tx.w)}, {"z", cvec_to_json(tx.z)}, {"v", scalars(tx.v)},
          {"b", scalars(tx.b)},      {"p_max", tx.p_max},       {"p_dev", tx.p_dev}};
}

TransceiverSet transceivers_from_json(const nlohmann::json& j) {
  TransceiverSet tx;
  tx.w = cvec_from_json(j.at("w"));
  tx.z = cvec_from_json(j.at("z"));
  for (const auto& c : j.at("v")) tx.v.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  for (const auto& c : j.at("b")) tx.b.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  tx.p_max = j.at("p_max").get<double>();
  tx.p_dev = j.at("p_dev").get<std::vector<double>>();
  return tx;
}

}  // namespace rfl
