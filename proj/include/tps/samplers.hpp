#pragma once

// Metropolis-Hastings chains and likelihood-tempered Sequential Monte Carlo
// over an arbitrary log posterior. All density arithmetic is in log space.
//
// SMC targets pi_phi(theta) ~ prior(theta) * like(theta)^phi with phi marched
// from 0 to 1. Each stage picks the largest increment that keeps the
// effective sample size above the threshold, reweights, and then resamples
// (systematic) and mutates every particle with a few MH steps against the
// current tempered target. Every particle draws from its own rng stream
// derived from (seed, stage, index), so the serial and OpenMP paths produce
// identical ensembles.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tps/execution.hpp"

namespace tps::samplers {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using LogDensity = std::function<double(const Vector&)>;
/// Log densities of every row of an (N x d) matrix. NaN marks a failure.
using LogDensityBatch = std::function<std::vector<double>(const Matrix&)>;
using PriorSampler = std::function<Vector(std::mt19937_64&)>;

class SamplerError : public std::runtime_error {
 public:
  enum class Where { step, stage, particle };
  SamplerError(Where where, std::size_t index, const std::string& msg)
      : std::runtime_error(msg), where_(where), index_(index) {}
  Where where() const { return where_; }
  std::size_t index() const { return index_; }

 private:
  Where where_;
  std::size_t index_;
};

// ---------------------------------------------------------------- MH

struct MhOptions {
  /// Steps between covariance adaptations; 0 disables adaptation.
  long adapt_interval = 200;
};

struct MhResult {
  Matrix samples;  ///< n_steps x d, state after every step (burn-in kept)
  long accepted = 0;
  double acceptance_rate = 0.0;
  Matrix proposal_cov;  ///< covariance in use at the end of the run
};

/// Random-walk MH with Gaussian proposals N(theta, cov). A proposal is
/// accepted when log r >= log u, u ~ U(0,1).
MhResult mh_run(const LogDensity& log_post, const Vector& init, const Matrix& cov0, long n_steps,
                std::uint64_t seed, const MhOptions& options = {});

/// Potential scale reduction factor per coordinate over >= 2 chains.
Vector gelman_rubin(std::span<const Matrix> chains);

/// Lower-triangular L with L L^T = cov. Tolerates positive semi-definite input.
Matrix proposal_factor(const Matrix& cov);

/// Weighted sample covariance of the rows of theta.
Matrix weighted_covariance(const Matrix& theta, std::span<const double> weights);

// ---------------------------------------------------------------- SMC

struct ParticleEnsemble {
  Matrix theta;                        ///< N x d
  std::vector<double> weights;         ///< normalized
  std::vector<double> log_likelihood;  ///< cached per particle
  double phi = 0.0;
  double ess = 0.0;
  int stage = 0;

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(theta.cols()); }
};

/// 1 / sum(w^2) for normalized weights.
double ess(std::span<const double> weights);

/// w_i <- w_i exp(delta_phi * loglike_i), renormalized after max-subtraction.
void reweight(ParticleEnsemble& ensemble, std::span<const double> loglikes, double delta_phi);

/// Largest increment in (0, 1 - phi] keeping the reweighted ESS >= ess_target
/// (30 bisection steps). Never returns less than (1 - phi) * 2^-30.
double next_phi(const ParticleEnsemble& ensemble, std::span<const double> loglikes,
                double ess_target);

/// Ancestor indices by systematic resampling with offset u in [0, 1).
/// Particle i is copied floor(N w_i) or ceil(N w_i) times.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u);

struct MutationStats {
  long proposed = 0;
  long accepted = 0;
  double acceptance_rate() const {
    return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }
};

/// Systematic resampling (weights reset to 1/N) followed by `mutation_steps`
/// MH steps per particle against prior * like^phi with a fixed proposal
/// covariance. Likelihoods of all proposals are evaluated as one batch.
MutationStats resample_and_mutate(ParticleEnsemble& ensemble, const LogDensity& log_prior,
                                  const LogDensityBatch& log_likelihood, int mutation_steps,
                                  std::uint64_t seed, const Matrix& proposal_cov,
                                  Execution exec = Execution::parallel);

struct SmcOptions {
  std::size_t n_particles = 10000;
  double ess_threshold_ratio = 0.5;
  int mutation_steps = 5;
  std::uint64_t seed = 7;
  Execution exec = Execution::parallel;
  /// Resample and mutate once more at phi = 1 if weights are not uniform,
  /// so the returned particles are equally weighted.
  bool final_resample = true;
  int max_stages = 10000;
};

struct StageRecord {
  int stage = 0;
  double phi = 0.0;
  double delta_phi = 0.0;
  double ess = 0.0;  ///< after reweighting, before resampling
  bool resampled = false;
  double acceptance_rate = 0.0;
  double elapsed_seconds = 0.0;  ///< since the start of the run
};

struct SmcResult {
  ParticleEnsemble ensemble;
  std::vector<StageRecord> stages;
};

SmcResult smc_run(const PriorSampler& prior_sampler, const LogDensity& log_prior,
                  const LogDensityBatch& log_likelihood, const SmcOptions& options);

/// Per-particle rng stream; identical for serial and parallel execution.
std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t stage, std::uint64_t index,
                             std::uint64_t purpose);

}  // namespace tps::samplers
