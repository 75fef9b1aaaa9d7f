#pragma once

// The pipeline subcommands. Each takes a validated RunConfig, writes its
// files under config.output_dir and returns a summary for the caller.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tps/cli/config.hpp"
#include "tps/execution.hpp"
#include "tps/pinn.hpp"
#include "tps/samplers.hpp"

namespace tps::cli {

struct CommandOptions {
  std::filesystem::path weights;  ///< empty: <output_dir>/weights.txt
};

std::filesystem::path weights_path(const RunConfig& config, const CommandOptions& options);

// ------------------------------------------------------------------ solve

struct SolveSummary {
  double back_temperature_explicit = 0.0;  ///< deg C at t_final
  double back_temperature_implicit = 0.0;
  double energy_balance_error = 0.0;  ///< relative, explicit scheme at t_final
  double max_scheme_difference = 0.0;  ///< deg C
};

/// field_fdm.csv, field_fdm_implicit.csv, field_diff.csv, solve_summary.json
SolveSummary cmd_solve(const RunConfig& config);

/// Relative mismatch between stored heat and applied flux at the last row.
double energy_balance_error(const heatsim::ThermalScenario& scenario,
                            const heatsim::MaterialSample& mat, const heatsim::TemperatureField& field);

// ------------------------------------------------------------------ train

/// Weights file plus loss_history.csv.
pinn::SurrogateModel cmd_train(const RunConfig& config, const CommandOptions& options);

// --------------------------------------------------------------- validate

struct FieldComparison {
  double rmse = 0.0;
  double max_abs_error = 0.0;
  double x_at_max = 0.0;  ///< m
  double t_at_max = 0.0;  ///< s
};

/// Compares a row-major field on the same grid as `reference`.
FieldComparison compare_fields(const heatsim::TemperatureField& reference,
                               std::span<const double> other);

/// Throws ConfigError when the weights were trained for another scenario or
/// do not cover the material.
void check_model(const RunConfig& config, const pinn::SurrogateModel& model);

/// validation.json and field_error.csv on a 100 x n_x grid.
FieldComparison cmd_validate(const RunConfig& config, const CommandOptions& options);
FieldComparison validate_model(const RunConfig& config, const pinn::SurrogateModel& model);

// ----------------------------------------------------------------- sample

/// Prior, tempered-likelihood pieces and prior sampler for one reliability
/// level, with the surrogate as the back-temperature predictor.
struct SurrogatePosterior {
  reliability::PosteriorModel model;
  samplers::LogDensity log_prior;
  samplers::LogDensityBatch log_likelihood;
  samplers::PriorSampler prior_sampler;
};

SurrogatePosterior make_posterior(const RunConfig& config, const pinn::SurrogateModel& model,
                                  double reliability, Execution exec = Execution::parallel);

struct LevelSummary {
  double reliability = 0.0;
  double mu_target = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_fdm = 0;
  double fdm_fraction = 0.0;   ///< weighted share with FDM T_back <= T_critical
  double pinn_fraction = 0.0;  ///< same with the surrogate
  double mean_t_back_pinn = 0.0;
  double mean_t_back_fdm = 0.0;
  double std_t_back_pinn = 0.0;
  double max_k = 0.0;
  std::size_t k_violations = 0;
  int stages = 0;
  double elapsed_seconds = 0.0;
  std::vector<double> rhat;  ///< mcmc only
};

/// samples_R<R>.csv and diagnostics_R<R>.csv per level, then reliability.json.
std::vector<LevelSummary> cmd_sample(const RunConfig& config, const CommandOptions& options);
std::vector<LevelSummary> sample_levels(const RunConfig& config, const pinn::SurrogateModel& model);

// -------------------------------------------------------------- benchmark

struct InferenceTiming {
  std::size_t m = 0;
  double fdm_seconds = 0.0;
  double pinn_seconds = 0.0;
};

struct SmcTiming {
  int workers = 0;
  std::size_t n_particles = 0;
  double seconds = 0.0;
};

/// Median over `repetitions` runs after one discarded warmup. FDM solves run
/// one after another; the surrogate evaluates the whole batch in one call.
std::vector<InferenceTiming> time_inference(const RunConfig& config, const pinn::SurrogateModel& model,
                                            std::span<const std::size_t> m_values, int repetitions);

/// SMC wall time at the first reliability level per worker count (0 = all cores).
std::vector<SmcTiming> time_smc(const RunConfig& config, const pinn::SurrogateModel& model,
                                std::span<const int> workers, std::size_t n_particles,
                                int repetitions);

/// bench_inference.csv and bench_smc.csv.
void cmd_benchmark(const RunConfig& config, const CommandOptions& options);

// ----------------------------------------------------------------- report

inline constexpr int kReportSchemaVersion = 1;

/// Files that cmd_report consumes, in the order they are checked.
std::vector<std::string> report_inputs();

/// Merges earlier outputs in `dir` into report.json. Throws IoError listing
/// every missing input.
nlohmann::json cmd_report(const std::filesystem::path& dir);

/// File-name form of a reliability level, e.g. "0.95".
std::string level_tag(double reliability);

}  // namespace tps::cli
