#pragma once

// Scenario execution: grid points x realizations as independent tasks, rows
// collected in canonical order (grid point, then realization).

#include <rfl/runner/config.hpp>
#include <rfl/runner/csv.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rfl::runner {

struct RunOptions {
  int jobs = 1;
  std::string output_dir;  // overrides the environment and the config when set
  bool progress = true;    // one line per finished task on stderr
};

struct RunReport {
  std::string output_dir;
  std::vector<std::string> files;
  std::string manifest;
  std::string config_hash;
  int tasks = 0;
  int failed = 0;
  double wall_time_s = 0.0;

  [[nodiscard]] bool ok() const { return failed == 0; }
};

/// Output directory precedence: explicit override, RFL_OUTPUT_DIR, config.
std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir);

/// Rows of one task. `trace` is filled for sparsity_convergence only.
struct TaskRows {
  std::vector<std::vector<std::string>> main;
  std::vector<std::vector<std::string>> trace;
};

std::vector<std::string> main_columns(Scenario s);

/// Runs a single (grid point, realization) task. Throws on failures other
/// than solver breakdowns, which are recorded as status "solver_failure".
TaskRows run_task(const ExperimentConfig& cfg, const GridPoint& point, int realization);

/// Executes the whole experiment and writes `<scenario>.csv` (plus traces),
/// and manifest.json. Failed tasks are listed in the manifest; rows of the
/// completed ones are still written.
RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

/// Recomputes the rows for realization seed `seed` at grid point `point`.
/// Throws ConfigError when the seed or point does not belong to the config.
Table replay(const ExperimentConfig& cfg, std::uint64_t seed, int point);

}  // namespace rfl::runner
