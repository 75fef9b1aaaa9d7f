#include "tps/reliability.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tps::reliability {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Acklam's rational approximation, relative error ~1e-9 before refinement.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  double x = acklam(p);
  // One Halley step against the erfc-based CDF. Work in the smaller tail so
  // the residual keeps its relative accuracy.
  const double tail = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
  const double u = tail * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

TargetSpec make_target(double t_critical, double reliability, double sigma_target) {
  if (!(reliability > 0.0 && reliability < 1.0)) {
    throw std::invalid_argument("make_target: reliability must lie in (0, 1)");
  }
  if (!(std::isfinite(sigma_target) && sigma_target > 0.0)) {
    throw std::invalid_argument("make_target: sigma_target must be > 0");
  }
  if (!std::isfinite(t_critical)) throw std::invalid_argument("make_target: t_critical must be finite");
  const double mu = reliability == 0.5 ? t_critical
                                       : t_critical - normal_quantile(reliability) * sigma_target;
  return {t_critical, reliability, sigma_target, mu};
}

double ParameterPrior::log_density(double v) const {
  if (!(v > 0.0) || !std::isfinite(v)) return kNegInf;
  switch (kind) {
    case Kind::uniform:
      return (v >= a && v <= b) ? -std::log(b - a) : kNegInf;
    case Kind::normal: {
      const double z = (v - a) / b;
      return -0.5 * z * z - std::log(b * std::sqrt(2.0 * std::numbers::pi));
    }
  }
  return kNegInf;
}

double ParameterPrior::sample(std::mt19937_64& rng) const {
  if (kind == Kind::uniform) return std::uniform_real_distribution<double>(a, b)(rng);
  return std::normal_distribution<double>(a, b)(rng);
}

void ParameterPrior::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("prior: parameters must be finite");
  if (kind == Kind::uniform && !(a < b)) throw std::invalid_argument("prior: uniform bounds must satisfy min < max");
  if (kind == Kind::uniform && a < 0.0) throw std::invalid_argument("prior: uniform support must be positive");
  if (kind == Kind::normal && !(b > 0.0)) throw std::invalid_argument("prior: normal std must be > 0");
}

void PriorSpec::validate() const {
  k.validate();
  rho_cp.validate();
  if (!(std::isfinite(k_max) && k_max > 0.0)) throw std::invalid_argument("prior: k_max must be > 0");
  if (k.kind == ParameterPrior::Kind::uniform && k.a >= k_max) {
    throw std::invalid_argument("prior: k_max excludes the whole k support");
  }
}

MaterialSample PriorSpec::sample(std::mt19937_64& rng) const {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const MaterialSample m{k.sample(rng), rho_cp.sample(rng)};
    if (std::isfinite(log_prior(*this, m))) return m;
  }
  throw std::runtime_error("prior: rejection sampling failed to find a point in the support");
}

double log_prior(const PriorSpec& prior, const MaterialSample& mat) {
  if (!(mat.k <= prior.k_max)) return kNegInf;
  const double lk = prior.k.log_density(mat.k);
  if (lk == kNegInf) return kNegInf;
  return lk + prior.rho_cp.log_density(mat.rho_cp);
}

double PosteriorModel::log_likelihood_of(double t_back) const {
  if (std::isnan(t_back)) return std::nan("");
  const double r = (target.mu_target - t_back) / sigma_like;
  return -0.5 * r * r - std::log(sigma_like * std::sqrt(2.0 * std::numbers::pi));
}

double PosteriorModel::log_likelihood(const MaterialSample& mat) const {
  const MaterialSample one[] = {mat};
  return log_likelihood_of(predictor(one).at(0));
}

std::vector<double> PosteriorModel::log_likelihood(std::span<const MaterialSample> mats) const {
  const auto t_back = predictor(mats);
  if (t_back.size() != mats.size()) throw std::runtime_error("predictor returned the wrong batch size");
  std::vector<double> out(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) out[i] = log_likelihood_of(t_back[i]);
  return out;
}

double PosteriorModel::log_posterior(const MaterialSample& mat) const {
  const double lp = log_prior(prior, mat);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(mat);
}

double reliability_fraction(std::span<const double> t_back, double t_critical) {
  if (t_back.empty()) throw std::invalid_argument("reliability: empty sample batch");
  std::size_t ok = 0;
  for (double t : t_back) ok += (t <= t_critical) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(t_back.size());
}

double verify_reliability(std::span<const MaterialSample> samples, double t_critical,
                          const heatsim::ThermalScenario& scenario) {
  if (samples.empty()) throw std::invalid_argument("verify_reliability: empty sample batch");
  const auto t_back = heatsim::back_temperatures(scenario, samples);
  return reliability_fraction(t_back, t_critical);
}

}  // namespace tps::reliability
