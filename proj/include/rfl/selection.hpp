#pragma once

#include <rfl/channel_model.hpp>
#include <rfl/conic/solver.hpp>
#include <rfl/mse_metrics.hpp>
#include <rfl/robust_lmi.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rfl {

struct SelectionConfig {
  double gamma_b = 0.0;             // linear MSE bound at the BS
  std::vector<double> gamma_d;      // linear MSE bound per device
  double p_max = 0.0;
  std::vector<double> p_dev;
  double nu1 = 1e-3;
  double nu2 = 1e-3;
  int max_ao_iters = 50;
  std::uint64_t seed = 0;
  // Build LMIs even when eps = 0 instead of the direct rotated-cone form.
  bool force_lmi = false;
  // Feasibility detection by bisection over m instead of m = K, K-1, ...
  bool binary_search = false;
  // Priority values below this are treated as exactly zero when ranking.
  double chi_zero_tol = 1e-6;
  conic::SolverSettings solver;

  void validate(int num_devices) const;
};

/// Fills a SelectionConfig from dB conventions and a channel set.
SelectionConfig make_selection_config(const DbConventions& conv, const ChannelSet& ch);

enum class Side { device, bs };

/// Solution of one convex subproblem of the alternating scheme.
struct SubproblemResult {
  conic::SolveStatus status = conic::SolveStatus::numerical_failure;
  TransceiverSet tx;   // fixed side copied from the input, free side solved
  RVec chi;            // length K; zero outside the device set
  RVec rho;
  RVec theta;
  double objective = 0.0;
  int iterations = 0;
  int num_vars = 0;
  std::string message;

  [[nodiscard]] bool ok() const { return status == conic::SolveStatus::optimal; }
};

/// Problem data for a single subproblem. `devices` is the set S (all devices
/// in the sparsity stage); `current` provides the fixed side.
struct SubproblemSpec {
  const ChannelSet* channels = nullptr;
  const SelectionConfig* config = nullptr;
  std::vector<int> devices;
  Stage stage = Stage::sparsity;
  Side side = Side::device;
  TransceiverSet current;
};

conic::ConicProgram build_subproblem(const SubproblemSpec& spec);
SubproblemResult solve_subproblem(const SubproblemSpec& spec);

SubproblemResult solve_device_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                         const TransceiverSet& current);
SubproblemResult solve_bs_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                     const TransceiverSet& current);
SubproblemResult solve_feasibility_device_subproblem(const ChannelSet& ch,
                                                     const SelectionConfig& cfg,
                                                     const std::vector<int>& set,
                                                     const TransceiverSet& current);
SubproblemResult solve_feasibility_bs_subproblem(const ChannelSet& ch, const SelectionConfig& cfg,
                                                 const std::vector<int>& set,
                                                 const TransceiverSet& current);

/// Starting beams along the dominant eigenvector of sum_k h_k h_k^H / ||h_k||^2
/// over `devices` (all when empty).
/// z is scaled down when needed so that sigma_1^2 ||z||^2 <= gamma_b / 2;
/// pass scale_z = false to keep ||z|| = 1.
TransceiverSet initialize_transceivers(const ChannelSet& ch, const SelectionConfig& cfg,
                                       const std::vector<int>& devices = {},
                                       bool scale_z = true);

/// Subproblem failure inside an alternating loop that should never fail.
class SubproblemFailure : public std::runtime_error {
 public:
  SubproblemFailure(const std::string& what, int iteration)
      : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

struct AoTrace {
  std::vector<double> values;
  bool converged = false;
  bool cap_hit = false;
};

struct SparsityResult {
  RVec chi;
  TransceiverSet tx;
  AoTrace trace;
};

/// Throws SubproblemFailure with the iteration index on solver failure.
SparsityResult sparsity_inducing(const ChannelSet& ch, const SelectionConfig& cfg);

/// Ascending by chi, ties by device index. Values below `zero_tol` count as 0.
std::vector<int> rank_devices(const RVec& chi, double zero_tol = 0.0);

struct FeasibilityAttempt {
  int m = 0;
  std::vector<int> set;
  AoTrace trace;
  bool feasible = false;
  double objective = 0.0;
  std::string failure;  // empty unless a subproblem failed
  TransceiverSet tx;
};

/// Alternating minimisation of the worst-case aggregation MSE over `set`
/// under the hard downlink bounds. Starts from `warm` when given and falls
/// back to beams matched to the set; the returned attempt is the first
/// feasible run, else the last one.
FeasibilityAttempt feasibility_ao(const ChannelSet& ch, const SelectionConfig& cfg,
                                  const std::vector<int>& set,
                                  const TransceiverSet* warm = nullptr);

struct SelectionOutcome {
  RVec chi;
  std::vector<int> permutation;
  std::vector<int> selected;
  TransceiverSet transceivers;
  MseReport achieved;
  AoTrace sparsity_trace;
  std::vector<FeasibilityAttempt> feasibility_trace;
  int m_final = 0;
  double objective = 0.0;  // converged aggregation objective of the accepted set
};

SelectionOutcome feasibility_detect(const std::vector<int>& permutation, const ChannelSet& ch,
                                    const SelectionConfig& cfg,
                                    const TransceiverSet* warm = nullptr);

/// Sparsity inducing, ranking and feasibility detection.
SelectionOutcome select_devices(const ChannelSet& ch, const SelectionConfig& cfg);

struct OracleResult {
  int max_size = 0;
  std::vector<int> witness;
  std::vector<std::vector<int>> feasible_sets;
};

/// Runs feasibility_ao on every subset (K <= 10), warm started from the
/// sparsity stage like select_devices.
OracleResult exhaustive_oracle(const ChannelSet& ch, const SelectionConfig& cfg);

nlohmann::json to_json(const SelectionOutcome& o);

}  // namespace rfl
