#pragma once

#include <rfl/channel_model.hpp>
#include <rfl/common.hpp>

#include <vector>

#include <json.hpp>

namespace rfl {

struct TransceiverSet {
  CVec w;  // BS transmit beam
  CVec z;  // BS receive beam
  std::vector<cplx> v;  // device receive scalars
  std::vector<cplx> b;  // device transmit scalars
  double p_max = 0.0;
  std::vector<double> p_dev;

  static TransceiverSet zeros(int num_antennas, int num_devices);
};

/// Per-device values cover every device; uplink figures cover only the
/// evaluated set. Worst-case fields are maxima over the uncertainty balls.
struct MseReport {
  std::vector<double> downlink;
  double uplink = 0.0;
  std::vector<double> nominal_downlink;
  double nominal_uplink = 0.0;
};

double downlink_mse(cplx v, const CVec& w, const CVec& h, double noise_dl);

double uplink_mse(const CVec& z, const std::vector<cplx>& b, const std::vector<CVec>& h,
                  double noise_ul);

// Maximum over ||e|| <= eps: by Cauchy-Schwarz |v e^H w| <= eps |v| ||w||, with
// equality at the aligned error, and the phase can be matched to the nominal
// residual. The uplink sum separates because each term sees only its own e_i.
double worst_case_downlink_mse(cplx v, const CVec& w, const CVec& h_hat, double eps,
                               double noise_dl);

double worst_case_uplink_mse(const CVec& z, const std::vector<cplx>& b,
                             const std::vector<CVec>& h_hat, const std::vector<double>& eps,
                             double noise_ul);

/// Error vector attaining worst_case_downlink_mse.
CVec aligned_downlink_error(cplx v, const CVec& w, const CVec& h_hat, double eps);

/// Error vector attaining device i's term of worst_case_uplink_mse.
CVec aligned_uplink_error(const CVec& z, cplx b, const CVec& h_hat, double eps);

/// Weighted average sum(|D_i| q_i) / sum(|D_i|).
double aggregation_target(const std::vector<double>& values, const std::vector<double>& sizes);

/// Worst-case and nominal MSEs of tx over the estimated channels, uplink
/// restricted to `selected`. An empty set gives uplink = 0.
MseReport evaluate_mse(const ChannelSet& ch, const TransceiverSet& tx,
                       const std::vector<int>& selected);

/// MSEs on the true channels (no maximisation); both field pairs coincide.
MseReport realized_mse(const ChannelSet& ch, const TransceiverSet& tx,
                       const std::vector<int>& selected);

nlohmann::json to_json(const MseReport& r);
nlohmann::json to_json(const TransceiverSet& tx);
TransceiverSet transceivers_from_json(const nlohmann::json& j);

}  // namespace rfl
