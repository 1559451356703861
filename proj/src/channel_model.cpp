#include <rfl/channel_model.hpp>

#include <cmath>
#include <string>

namespace rfl {

namespace {

CVec gaussian_cvec(int n, Rng& rng) {
  // CN(0, 1): unit total variance per entry.
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CVec v(n);
  for (int i = 0; i < n; ++i) {
    const double re = g(rng);
    const double im = g(rng);
    v(i) = cplx(re, im);
  }
  return v;
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

double path_loss_db(double distance_km, const GeometryConfig& geom) {
  return geom.pathloss_offset_db + geom.pathloss_slope * std::log10(distance_km);
}

double channel_gain(double distance_km, const GeometryConfig& geom) {
  return std::pow(10.0, -(path_loss_db(distance_km, geom) - geom.gain_offset_db) / 10.0);
}

CVec sample_error_ball(int n, double eps, bool boundary_only, Rng& rng) {
  if (n < 1) throw ConfigError("sample_error_ball: dimension must be >= 1");
  if (eps < 0.0) throw ConfigError("sample_error_ball: radius must be nonnegative");
  if (eps == 0.0) return CVec::Zero(n);
  CVec d = gaussian_cvec(n, rng);
  double nrm = d.norm();
  while (nrm == 0.0) {
    d = gaussian_cvec(n, rng);
    nrm = d.norm();
  }
  d /= nrm;
  double r = eps;
  if (!boundary_only) {
    // radial CDF in real dimension 2n is (r/eps)^(2n)
    std::uniform_real_distribution<double> u(0.0, 1.0);
    r = eps * std::pow(u(rng), 1.0 / (2.0 * n));
  }
  return d * r;
}

CVec sample_error_ball(int n, double eps, bool boundary_only, std::uint64_t seed) {
  Rng rng(seed);
  return sample_error_ball(n, eps, boundary_only, rng);
}

ChannelSet generate_channels(int num_devices, int num_antennas, const GeometryConfig& geom,
                             const std::vector<double>& radii, double noise_dl, double noise_ul) {
  if (num_devices < 1 || num_antennas < 1)
    throw ConfigError("generate_channels: K and N must be >= 1");
  if (static_cast<int>(radii.size()) != num_devices)
    throw ConfigError("generate_channels: need one radius per device");
  for (double r : radii)
    if (!(r >= 0.0)) throw ConfigError("generate_channels: radii must be nonnegative");
  require_positive(geom.cell_radius_km, "cell_radius_km");
  if (!(geom.min_distance_km > 0.0) || geom.min_distance_km >= geom.cell_radius_km)
    throw ConfigError("generate_channels: need 0 < min_distance_km < cell_radius_km");
  require_positive(noise_dl, "noise_dl");
  require_positive(noise_ul, "noise_ul");

  ChannelSet ch;
  ch.num_antennas = num_antennas;
  ch.num_devices = num_devices;
  ch.noise_dl = noise_dl;
  ch.noise_ul = noise_ul;

  // Placement and fading come from one stream, the error draws from another,
  // so changing radii leaves the estimates untouched.
  Rng rng(mix_seed(geom.seed, 0));
  Rng err_rng(mix_seed(geom.seed, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r0 = geom.min_distance_km;
  const double r1 = geom.cell_radius_km;
  for (int k = 0; k < num_devices; ++k) {
    const double l = std::sqrt(r0 * r0 + u(rng) * (r1 * r1 - r0 * r0));
    ch.distances_km.push_back(l);
    CVec h = gaussian_cvec(num_antennas, rng) * std::sqrt(channel_gain(l, geom));
    double eps = radii[k];
    if (geom.relative_radii) eps *= h.norm();
    ch.radii.push_back(eps);
    ch.truth.push_back(h + sample_error_ball(num_antennas, eps, false, err_rng));
    ch.estimated.push_back(std::move(h));
  }
  return ch;
}

ChannelSet redraw_truth(const ChannelSet& ch, std::uint64_t seed, bool boundary_only) {
  ChannelSet out = ch;
  Rng rng(seed);
  for (int k = 0; k < ch.num_devices; ++k)
    out.truth[k] = ch.estimated[k] + sample_error_ball(ch.num_antennas, ch.radii[k], boundary_only, rng);
  return out;
}

LinearParams db_to_linear(const DbConventions& conv, double noise_dl, double noise_ul) {
  require_positive(noise_dl, "noise_dl");
  require_positive(noise_ul, "noise_ul");
  LinearParams lin;
  lin.p_max = noise_dl * std::pow(10.0, conv.snr_bs_db / 10.0);
  lin.p_dev = noise_ul * std::pow(10.0, conv.snr_dev_db / 10.0);
  lin.gamma_b = noise_ul / lin.p_dev * std::pow(10.0, conv.gamma_b_db / 10.0);
  lin.gamma_d = noise_dl / lin.p_max * std::pow(10.0, conv.gamma_d_db / 10.0);
  for (double x : {lin.p_max, lin.p_dev, lin.gamma_b, lin.gamma_d})
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("db_to_linear: non-finite or zero result");
  return lin;
}

DbConventions linear_to_db(const LinearParams& lin, double noise_dl, double noise_ul) {
  require_positive(noise_dl, "noise_dl");
  require_positive(noise_ul, "noise_ul");
  require_positive(lin.p_max, "p_max");
  require_positive(lin.p_dev, "p_dev");
  require_positive(lin.gamma_b, "gamma_b");
  require_positive(lin.gamma_d, "gamma_d");
  DbConventions c;
  c.snr_bs_db = 10.0 * std::log10(lin.p_max / noise_dl);
  c.snr_dev_db = 10.0 * std::log10(lin.p_dev / noise_ul);
  c.gamma_b_db = 10.0 * std::log10(lin.gamma_b / (noise_ul / lin.p_dev));
  c.gamma_d_db = 10.0 * std::log10(lin.gamma_d / (noise_dl / lin.p_max));
  return c;
}

nlohmann::json cvec_to_json(const CVec& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back({v(i).real(), v(i).imag()});
  return arr;
}

CVec cvec_from_json(const nlohmann::json& j) {
  CVec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = cplx(j[i].at(0).get<double>(), j[i].at(1).get<double>());
  return v;
}

nlohmann::json to_json(const ChannelSet& ch) {
  nlohmann::json j;
  j["num_antennas"] = ch.num_antennas;
  j["num_devices"] = ch.num_devices;
  j["noise_dl"] = ch.noise_dl;
  j["noise_ul"] = ch.noise_ul;
  j["radii"] = ch.radii;
  j["distances_km"] = ch.distances_km;
  auto& est = j["estimated"] = nlohmann::json::array();
  auto& tru = j["truth"] = nlohmann::json::array();
  for (int k = 0; k < ch.num_devices; ++k) {
    est.push_back(cvec_to_json(ch.estimated[k]));
    tru.push_back(cvec_to_json(ch.truth[k]));
  }
  return j;
}

ChannelSet channel_set_from_json(const nlohmann::json& j) {
  ChannelSet ch;
  ch.num_antennas = j.at("num_antennas").get<int>();
  ch.num_devices = j.at("num_devices").get<int>();
  ch.noise_dl = j.at("noise_dl").get<double>();
  ch.noise_ul = j.at("noise_ul").get<double>();
  ch.radii = j.at("radii").get<std::vector<double>>();
  if (j.contains("distances_km")) ch.distances_km = j["distances_km"].get<std::vector<double>>();
  for (const auto& e : j.at("estimated")) ch.estimated.push_back(cvec_from_json(e));
  for (const auto& e : j.at("truth")) ch.truth.push_back(cvec_from_json(e));
  if (static_cast<int>(ch.estimated.size()) != ch.num_devices ||
      static_cast<int>(ch.truth.size()) != ch.num_devices ||
      static_cast<int>(ch.radii.size()) != ch.num_devices)
    throw ConfigError("channel set: device count mismatch");
  for (int k = 0; k < ch.num_devices; ++k)
    if (ch.estimated[k].size() != ch.num_antennas || ch.truth[k].size() != ch.num_antennas)
      throw ConfigError("channel set: antenna count mismatch");
  return ch;
}

}  // namespace rfl
