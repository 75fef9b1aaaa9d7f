#pragma once

// Bayesian description of the back-temperature design constraint.
//
// A reliability level R and a spread sigma_target define the target
// back-temperature distribution N(mu_target, sigma_target) with
//   R = P(T_back <= T_critical)  =>  mu_target = T_critical - z(R) sigma_target.
// The posterior over materials is prior(theta) * N(T_back(theta); mu_target,
// sigma_like); the evidence is never formed.

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tps/heatsim.hpp"

namespace tps::reliability {

using heatsim::MaterialSample;

/// Standard normal CDF.
double normal_cdf(double z);
/// Standard normal quantile, |error| < 1e-12 over (0, 1).
double normal_quantile(double p);

struct TargetSpec {
  double t_critical = 250.0;
  double reliability = 0.95;
  double sigma_target = 5.0;
  double mu_target = 0.0;
};

TargetSpec make_target(double t_critical, double reliability, double sigma_target);

/// One-dimensional prior factor.
struct ParameterPrior {
  enum class Kind { uniform, normal };
  Kind kind = Kind::uniform;
  double a = 0.0;  ///< uniform: lower bound; normal: mean
  double b = 1.0;  ///< uniform: upper bound; normal: standard deviation

  static ParameterPrior uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static ParameterPrior normal(double mean, double sd) { return {Kind::normal, mean, sd}; }

  /// Log density on the positive reals; -inf outside the support.
  double log_density(double v) const;
  double sample(std::mt19937_64& rng) const;
  void validate() const;
};

struct PriorSpec {
  ParameterPrior k = ParameterPrior::uniform(0.1, 1.3);
  ParameterPrior rho_cp = ParameterPrior::uniform(0.8e6, 2.4e6);
  double k_max = 1.0;  ///< hard cap on conductivity

  void validate() const;
  /// Rejection sampling from the factored prior restricted to k <= k_max.
  MaterialSample sample(std::mt19937_64& rng) const;
};

double log_prior(const PriorSpec& prior, const MaterialSample& mat);

/// Back temperatures in deg C for a batch; NaN marks a failed item.
using BackTemperatureFn = std::function<std::vector<double>(std::span<const MaterialSample>)>;

struct PosteriorModel {
  TargetSpec target;
  PriorSpec prior;
  BackTemperatureFn predictor;
  double sigma_like = 5.0;

  /// Gaussian log density of a back temperature about mu_target.
  double log_likelihood_of(double t_back) const;
  double log_likelihood(const MaterialSample& mat) const;
  /// One predictor call for the whole batch.
  std::vector<double> log_likelihood(std::span<const MaterialSample> mats) const;
  double log_posterior(const MaterialSample& mat) const;
};

/// Fraction of samples whose explicit-FDM back temperature is <= t_critical.
double verify_reliability(std::span<const MaterialSample> samples, double t_critical,
                          const heatsim::ThermalScenario& scenario);

/// Same check from precomputed back temperatures.
double reliability_fraction(std::span<const double> t_back, double t_critical);

}  // namespace tps::reliability
