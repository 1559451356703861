#pragma once

// Experiment configuration (JSON). Unknown keys are rejected; every error
// carries the line of the offending entry.

#include <rfl/channel_model.hpp>
#include <rfl/fl/simulator.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rfl::runner {

enum class Scenario { sparsity_convergence, selection_vs_gamma, selection_vs_epsilon, fl_training, oracle_validation };

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

/// Invalid configuration; `line` is 1-based (0 when unknown).
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& source, int line, const std::string& msg);
  int line;
};

struct BaseParams {
  int num_antennas = 48;
  int num_devices = 20;
  double epsilon = 0.1;
  DbConventions db;
  GeometryConfig geometry;
  double noise_dl = 1.0;
  double noise_ul = 1.0;
};

struct SelectionParams {
  double nu1 = 1e-3;
  double nu2 = 1e-3;
  int max_ao_iters = 50;
  double solver_tol = 1e-7;
  int solver_max_iterations = 200;
  bool binary_search = false;
  bool force_lmi = false;
};

/// Sweep axes; the grid is their Cartesian product in this nesting order
/// (gamma_b_db outermost, design innermost). Empty axes take the base value.
struct Grid {
  std::vector<double> gamma_b_db;
  std::vector<double> gamma_d_db;
  std::vector<double> epsilon;
  std::vector<std::string> design;  // fl_training: robust, nonrobust, ideal, manual
};

struct FlParams {
  fl::FlConfig train;
  int samples = 2000;
  int test_samples = 1000;
  int features = 20;
  int classes = 4;
  double separation = 3.0;
  std::string mnist_dir;
  int mnist_train_limit = 6000;
  int mnist_test_limit = 1000;
  double true_epsilon = -1.0;  // < 0: same as the grid point's epsilon
  bool realized_distortion = true;
  double manual_broadcast_var = 0.0;
  double manual_aggregation_var = 0.0;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::selection_vs_gamma;
  std::string profile = "paper";
  std::uint64_t seed = 0;
  int num_realizations = 50;
  std::string output_dir = "results";
  BaseParams base;
  SelectionParams selection;
  Grid grid;
  FlParams fl;
};

struct GridPoint {
  int index = 0;
  double gamma_b_db = 0.0;
  double gamma_d_db = 0.0;
  double epsilon = 0.0;
  std::string design;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg);

/// Parses and validates. `source` names the text in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of the resolved configuration (output_dir excluded).
nlohmann::json canonical_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& data);

/// Seed of realization r.
std::uint64_t realization_seed(const ExperimentConfig& cfg, int r);

}  // namespace rfl::runner
