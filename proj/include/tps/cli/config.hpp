#pragma once

// Run configuration for the tps-reliab binary. A single JSON document with
// optional blocks; every omitted key keeps its default, so "{}" reproduces
// the reference setup. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tps/heatsim.hpp"
#include "tps/pinn.hpp"
#include "tps/reliability.hpp"

namespace tps::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TargetBlock {
  double t_critical = 250.0;
  std::vector<double> reliabilities{0.95, 0.99, 0.99999};
  double sigma_target = 5.0;
  double sigma_like = 0.0;  ///< 0 means sigma_target

  double likelihood_width() const { return sigma_like > 0.0 ? sigma_like : sigma_target; }
};

struct SamplerBlock {
  std::string method = "smc";  ///< "smc" or "mcmc"
  std::size_t n_particles = 10000;
  double ess_threshold_ratio = 0.5;
  int mutation_steps = 5;
  int mcmc_chains = 3;
  long mcmc_steps = 1000;
  std::uint64_t seed = 7;
  std::size_t fdm_subsample = 0;  ///< samples re-run through the FDM; 0 means all
};

struct BenchmarkBlock {
  std::vector<std::size_t> m_values{1, 10, 100, 1000, 10000};
  int repetitions = 5;
  std::vector<int> workers{1, 2, 4, 0};  ///< 0 means every available core
  std::size_t smc_particles = 10000;
};

struct RunConfig {
  heatsim::ThermalScenario scenario;
  pinn::TrainingConfig training;
  TargetBlock target;
  reliability::PriorSpec prior;
  SamplerBlock sampler;
  BenchmarkBlock benchmark;
  heatsim::MaterialSample validation{0.65, 1509.0 * 1050.0};
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError naming the offending block.
  void validate() const;
};

/// Parses and validates. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Effective configuration with every default filled in.
nlohmann::json to_json(const RunConfig& config);

}  // namespace tps::cli
