#pragma once

// Model-average federated learning with distorted broadcast and aggregation.
//
// Parameters are normalised to zero mean / unit variance before each
// transmission (the two statistics travel error free) so that an MSE
// computed for unit-variance symbols is the per-entry noise variance. The
// uplink MSE measures the error of the received sum over the selected set;
// the global model is the (weighted) mean, so the per-entry aggregation
// noise variance is MSE_BS / |S|^2.

#include <rfl/channel_model.hpp>
#include <rfl/fl/data.hpp>
#include <rfl/fl/model.hpp>
#include <rfl/mse_metrics.hpp>
#include <rfl/selection.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfl::fl {

enum class DatasetKind { synthetic_blobs, mnist_subset, mnist_full };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind k);
Partition partition_from_string(const std::string& s);
std::string to_string(Partition p);

struct FlConfig {
  int num_devices = 4;
  int rounds = 20;
  double learning_rate = 0.01;
  int local_epochs = 1;
  int local_steps = 0;  // > 0 overrides local_epochs
  int batch_size = 64;
  Partition partition = Partition::iid;
  ModelKind model = ModelKind::logistic;
  int hidden = 32;
  DatasetKind dataset = DatasetKind::synthetic_blobs;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DistortionSpec {
  enum class Source { from_selection_outcome, manual };
  std::vector<double> broadcast;  // per device (index = device id)
  double aggregation = 0.0;       // MSE of the received sum
  Source source = Source::manual;

  void validate() const;
};

/// Broadcast variances from the downlink entries, aggregation from the uplink MSE.
DistortionSpec distortion_from_mse(const MseReport& mse);

struct NormStats {
  double mean = 0.0;
  double scale = 1.0;
};

/// Empirical mean and standard deviation (scale 1 for constant vectors).
NormStats norm_stats(const RVec& q);
RVec normalize(const RVec& q, const NormStats& st);
RVec denormalize(const RVec& q, const NormStats& st);

/// One received copy of q_global per listed device.
std::vector<RVec> broadcast_with_distortion(const RVec& q_global, const std::vector<int>& devices,
                                            const DistortionSpec& spec, Rng& rng);

/// Weighted mean of the locals (shared normalisation statistics) plus noise of
/// variance spec.aggregation / |S|^2 per entry. Throws on an empty set.
RVec aggregate_with_distortion(const std::vector<RVec>& locals, const std::vector<double>& weights,
                               const DistortionSpec& spec, Rng& rng);

struct RoundPlan {
  std::vector<int> selected;
  DistortionSpec distortion;
  double mse_bs = 0.0;           // for reporting
  double mse_device_mean = 0.0;  // over the selected devices
};

using Planner = std::function<RoundPlan(int round)>;

/// Same set and distortion every round.
Planner fixed_planner(std::vector<int> selected, DistortionSpec spec);

struct SelectionPlannerConfig {
  int num_antennas = 16;
  GeometryConfig geometry;
  DbConventions db;
  double true_radius = 0.1;    // channels are drawn within this ball
  double design_radius = 0.1;  // radius assumed by the transceiver design
  // Distortion from the MSEs realised on the true channels (otherwise from
  // the designed worst-case values).
  bool realized = true;
  double noise_dl = 1.0;
  double noise_ul = 1.0;
  double nu1 = 1e-3;
  double nu2 = 1e-3;
  int max_ao_iters = 50;
  bool force_lmi = false;
  bool binary_search = false;
  conic::SolverSettings solver;
  std::uint64_t seed = 0;
};

/// Fresh channels every round, selection and transceivers from select_devices.
Planner selection_planner(int num_devices, SelectionPlannerConfig cfg);

struct RoundMetrics {
  int round = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  int num_selected = 0;
  double mse_bs = 0.0;
  double mse_device_mean = 0.0;
  bool skipped = false;
};

struct FlResult {
  std::vector<RoundMetrics> rounds;
  RVec final_params;
};

/// shards[k] is device k's data; train_eval is used for the reported
/// training loss.
FlResult run_federated_training(const FlConfig& cfg, const Model& model, const std::vector<Dataset>& shards,
                                const Dataset& train_eval, const Dataset& test, const Planner& planner);

void write_metrics_csv(std::ostream& os, const FlResult& r);

}  // namespace rfl::fl
