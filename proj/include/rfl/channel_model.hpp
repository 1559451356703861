#pragma once

#include <rfl/common.hpp>

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace rfl {

struct ChannelSet {
  int num_antennas = 0;
  int num_devices = 0;
  std::vector<CVec> estimated;
  std::vector<double> radii;
  std::vector<CVec> truth;
  double noise_dl = 1.0;  // sigma_0^2, at the devices
  double noise_ul = 1.0;  // sigma_1^2, at the BS
  std::vector<double> distances_km;
};

struct GeometryConfig {
  double cell_radius_km = 0.1;
  double min_distance_km = 0.01;
  double pathloss_offset_db = 128.1;
  double pathloss_slope = 37.6;
  // Added to every link budget before converting to a linear gain. With
  // unit noise powers the raw path loss (~50-90 dB) would make every device
  // unreachable; this shifts the operating point without changing the
  // relative spread between near and far devices.
  double gain_offset_db = 75.0;
  // When set, radii are multiplied by ||h_hat_k|| (relative uncertainty).
  bool relative_radii = false;
  std::uint64_t seed = 0;
};

struct DbConventions {
  double snr_bs_db = 10.0;
  double snr_dev_db = 10.0;
  double gamma_b_db = 5.0;
  double gamma_d_db = 5.0;
};

/// Linear-unit counterparts of DbConventions given the noise powers.
struct LinearParams {
  double p_max = 0.0;    // BS power budget
  double p_dev = 0.0;    // per-device budget P_0
  double gamma_b = 0.0;  // absolute MSE bound at the BS
  double gamma_d = 0.0;  // absolute MSE bound at each device
};

double path_loss_db(double distance_km, const GeometryConfig& geom);

/// Linear power gain for a device at the given distance (includes gain_offset_db).
double channel_gain(double distance_km, const GeometryConfig& geom);

ChannelSet generate_channels(int num_devices, int num_antennas, const GeometryConfig& geom,
                             const std::vector<double>& radii, double noise_dl = 1.0,
                             double noise_ul = 1.0);

/// Uniform point in the complex ball ||e|| <= eps (or on its sphere).
CVec sample_error_ball(int n, double eps, bool boundary_only, Rng& rng);
CVec sample_error_ball(int n, double eps, bool boundary_only, std::uint64_t seed);

LinearParams db_to_linear(const DbConventions& conv, double noise_dl, double noise_ul);
DbConventions linear_to_db(const LinearParams& lin, double noise_dl, double noise_ul);

/// Returns a copy whose truth vectors are redrawn inside the balls.
ChannelSet redraw_truth(const ChannelSet& ch, std::uint64_t seed, bool boundary_only = false);

nlohmann::json to_json(const ChannelSet& ch);
ChannelSet channel_set_from_json(const nlohmann::json& j);

nlohmann::json cvec_to_json(const CVec& v);
CVec cvec_from_json(const nlohmann::json& j);

}  // namespace rfl
