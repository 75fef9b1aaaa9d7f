#include "tps/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace tps::samplers {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPurposeInit = 1;
constexpr std::uint64_t kPurposeResample = 2;
constexpr std::uint64_t kPurposeMutate = 3;

double tempered(double log_prior, double log_like, double phi) {
  if (log_prior == kNegInf) return kNegInf;
  return phi > 0.0 ? log_prior + phi * log_like : log_prior;
}

Vector draw_normal(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vector z(d);
  for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
  return z;
}

// ESS of w_i exp(delta * ll_i) without forming the weights explicitly.
double reweighted_ess(std::span<const double> w, std::span<const double> ll, double delta) {
  double m = kNegInf;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) m = std::max(m, std::log(w[i]) + delta * ll[i]);
  }
  if (m == kNegInf) return 0.0;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    const double e = std::exp(std::log(w[i]) + delta * ll[i] - m);
    s1 += e;
    s2 += e * e;
  }
  return s1 * s1 / s2;
}

void check_loglikes(std::span<const double> ll, std::size_t n) {
  if (ll.size() != n) throw std::invalid_argument("log-likelihood batch has the wrong size");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(ll[i])) {
      throw SamplerError(SamplerError::Where::particle, i,
                         "log-likelihood failed at particle " + std::to_string(i));
    }
  }
}

}  // namespace

std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t stage, std::uint64_t index,
                             std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

Matrix proposal_factor(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("proposal covariance must be square");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Semi-definite (e.g. a collapsed proposal): fall back to V sqrt(max(L,0)).
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw std::invalid_argument("proposal covariance is not symmetric");
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Matrix weighted_covariance(const Matrix& theta, std::span<const double> weights) {
  const Eigen::Index n = theta.rows();
  const Eigen::Map<const Vector> w(weights.data(), n);
  const double total = w.sum();
  const Vector mean = (theta.transpose() * w) / total;
  const Matrix centered = theta.rowwise() - mean.transpose();
  return centered.transpose() * w.asDiagonal() * centered / total;
}

MhResult mh_run(const LogDensity& log_post, const Vector& init, const Matrix& cov0, long n_steps,
                std::uint64_t seed, const MhOptions& options) {
  const Eigen::Index d = init.size();
  if (cov0.rows() != d || cov0.cols() != d) throw std::invalid_argument("mh_run: covariance shape mismatch");
  if (n_steps < 0) throw std::invalid_argument("mh_run: n_steps must be >= 0");
  double current_lp = log_post(init);
  if (!std::isfinite(current_lp)) throw std::invalid_argument("mh_run: log posterior not finite at init");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix cov = cov0;
  Matrix factor = proposal_factor(cov);
  Vector current = init;

  MhResult out;
  out.samples.resize(n_steps, d);
  const double scale = 2.38 * 2.38 / static_cast<double>(d);
  for (long step = 0; step < n_steps; ++step) {
    const Vector proposal = current + factor * draw_normal(rng, d);
    const double lp = log_post(proposal);
    if (std::isnan(lp)) {
      throw SamplerError(SamplerError::Where::step, static_cast<std::size_t>(step),
                         "log posterior returned NaN at step " + std::to_string(step));
    }
    const double log_r = lp - current_lp;
    if (log_r >= std::log(unif(rng))) {
      current = proposal;
      current_lp = lp;
      ++out.accepted;
    }
    out.samples.row(step) = current.transpose();

    if (options.adapt_interval > 0 && (step + 1) % options.adapt_interval == 0 && step + 1 >= 2) {
      const auto rows = out.samples.topRows(step + 1);
      const Vector mean = rows.colwise().mean().transpose();
      const Matrix centered = rows.rowwise() - mean.transpose();
      const Matrix sample_cov = centered.transpose() * centered / static_cast<double>(step);
      if (sample_cov.diagonal().minCoeff() > 0.0) {
        cov = scale * sample_cov;
        cov.diagonal() += 1e-10 * cov.diagonal();
        factor = proposal_factor(cov);
      }
    }
  }
  out.acceptance_rate = n_steps ? static_cast<double>(out.accepted) / static_cast<double>(n_steps) : 0.0;
  out.proposal_cov = cov;
  return out;
}

Vector gelman_rubin(std::span<const Matrix> chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const Eigen::Index n = chains.front().rows();
  const Eigen::Index d = chains.front().cols();
  if (n < 2) throw std::invalid_argument("gelman_rubin: chains need at least two samples");
  const double m = static_cast<double>(chains.size());
  Matrix means(static_cast<Eigen::Index>(chains.size()), d);
  Vector within = Vector::Zero(d);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    if (chains[c].rows() != n || chains[c].cols() != d) {
      throw std::invalid_argument("gelman_rubin: chains must share a shape");
    }
    const Vector mu = chains[c].colwise().mean().transpose();
    means.row(static_cast<Eigen::Index>(c)) = mu.transpose();
    const Matrix centered = chains[c].rowwise() - mu.transpose();
    within += (centered.array().square().colwise().sum() / static_cast<double>(n - 1)).matrix().transpose();
  }
  within /= m;
  const Vector grand = means.colwise().mean().transpose();
  const Matrix dev = means.rowwise() - grand.transpose();
  const Vector between_over_n = (dev.array().square().colwise().sum() / (m - 1.0)).matrix().transpose();
  const double nn = static_cast<double>(n);
  const Vector var_plus = (nn - 1.0) / nn * within + between_over_n;
  return (var_plus.array() / within.array()).sqrt().matrix();
}

double ess(std::span<const double> weights) {
  double s2 = 0.0;
  for (double w : weights) s2 += w * w;
  if (!(s2 > 0.0)) throw std::invalid_argument("ess: all weights are zero");
  return 1.0 / s2;
}

void reweight(ParticleEnsemble& ensemble, std::span<const double> loglikes, double delta_phi) {
  if (!(delta_phi >= 0.0)) throw std::invalid_argument("reweight: delta_phi must be >= 0");
  auto& w = ensemble.weights;
  if (loglikes.size() != w.size()) throw std::invalid_argument("reweight: size mismatch");
  if (delta_phi == 0.0) return;
  std::vector<double> lw(w.size(), kNegInf);
  double m = kNegInf;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0 && loglikes[i] != kNegInf) {
      lw[i] = std::log(w[i]) + delta_phi * loglikes[i];
      m = std::max(m, lw[i]);
    }
  }
  if (m == kNegInf || !std::isfinite(m)) {
    throw SamplerError(SamplerError::Where::stage, static_cast<std::size_t>(ensemble.stage),
                       "all particle weights vanished at stage " + std::to_string(ensemble.stage));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - m);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  ensemble.ess = ess(w);
}

double next_phi(const ParticleEnsemble& ensemble, std::span<const double> loglikes,
                double ess_target) {
  const double remaining = 1.0 - ensemble.phi;
  if (!(remaining > 0.0)) throw std::invalid_argument("next_phi: phi already reached 1");
  if (loglikes.size() != ensemble.size()) throw std::invalid_argument("next_phi: size mismatch");
  if (reweighted_ess(ensemble.weights, loglikes, remaining) >= ess_target) return remaining;
  double lo = 0.0, hi = remaining;
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (reweighted_ess(ensemble.weights, loglikes, mid) >= ess_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::max(lo, remaining * std::ldexp(1.0, -30));
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  if (n == 0) throw std::invalid_argument("systematic_resample: empty weights");
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("systematic_resample: u must lie in [0, 1)");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("systematic_resample: weights sum to zero");
  std::vector<std::size_t> ancestors(n);
  const double nn = static_cast<double>(n);
  std::size_t i = 0;
  double cumulative = weights[0] / total;
  for (std::size_t j = 0; j < n; ++j) {
    const double pos = (u + static_cast<double>(j)) / nn;
    while (pos >= cumulative && i + 1 < n) {
      ++i;
      cumulative += weights[i] / total;
    }
    ancestors[j] = i;
  }
  return ancestors;
}

MutationStats resample_and_mutate(ParticleEnsemble& ensemble, const LogDensity& log_prior,
                                  const LogDensityBatch& log_likelihood, int mutation_steps,
                                  std::uint64_t seed, const Matrix& proposal_cov, Execution exec) {
  const std::size_t n = ensemble.size();
  const auto d = static_cast<Eigen::Index>(ensemble.dim());
  if (mutation_steps < 0) throw std::invalid_argument("resample_and_mutate: mutation_steps must be >= 0");
  const auto stage = static_cast<std::uint64_t>(ensemble.stage);

  auto resample_rng = particle_rng(seed, stage, 0, kPurposeResample);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(resample_rng);
  const auto ancestors = systematic_resample(ensemble.weights, u);
  Matrix theta(static_cast<Eigen::Index>(n), d);
  std::vector<double> ll(n);
  for (std::size_t j = 0; j < n; ++j) {
    theta.row(static_cast<Eigen::Index>(j)) = ensemble.theta.row(static_cast<Eigen::Index>(ancestors[j]));
    ll[j] = ensemble.log_likelihood[ancestors[j]];
  }
  ensemble.theta = std::move(theta);
  ensemble.log_likelihood = std::move(ll);
  std::fill(ensemble.weights.begin(), ensemble.weights.end(), 1.0 / static_cast<double>(n));
  ensemble.ess = static_cast<double>(n);

  MutationStats stats;
  if (mutation_steps == 0) return stats;

  const Matrix factor = proposal_factor(proposal_cov);
  const double phi = ensemble.phi;
  const bool parallel = exec == Execution::parallel;
  const long count = static_cast<long>(n);

  std::vector<std::mt19937_64> rngs(n);
  std::vector<double> lp_cur(n), lp_new(n), ll_new(n), log_u(n);
  Matrix proposals(static_cast<Eigen::Index>(n), d);

#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < count; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    rngs[ui] = particle_rng(seed, stage, ui, kPurposeMutate);
    lp_cur[ui] = log_prior(ensemble.theta.row(i).transpose());
  }

  for (int step = 0; step < mutation_steps; ++step) {
#pragma omp parallel for schedule(static) if (parallel)
    for (long i = 0; i < count; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Vector prop = ensemble.theta.row(i).transpose() + factor * draw_normal(rngs[ui], d);
      proposals.row(i) = prop.transpose();
      lp_new[ui] = log_prior(prop);
      log_u[ui] = std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rngs[ui]));
    }

    // Likelihood only where the prior supports the proposal.
    std::vector<std::size_t> live;
    live.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (lp_new[i] != kNegInf) live.push_back(i);
    }
    Matrix batch(static_cast<Eigen::Index>(live.size()), d);
    for (std::size_t k = 0; k < live.size(); ++k) {
      batch.row(static_cast<Eigen::Index>(k)) = proposals.row(static_cast<Eigen::Index>(live[k]));
    }
    const auto ll_live = live.empty() ? std::vector<double>{} : log_likelihood(batch);
    if (ll_live.size() != live.size()) throw std::invalid_argument("log-likelihood batch has the wrong size");
    std::fill(ll_new.begin(), ll_new.end(), kNegInf);
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (std::isnan(ll_live[k])) {
        throw SamplerError(SamplerError::Where::particle, live[k],
                           "log-likelihood failed at particle " + std::to_string(live[k]));
      }
      ll_new[live[k]] = ll_live[k];
    }

    long accepted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double cur = tempered(lp_cur[i], ensemble.log_likelihood[i], phi);
      const double nxt = tempered(lp_new[i], ll_new[i], phi);
      if (nxt != kNegInf && nxt - cur >= log_u[i]) {
        ensemble.theta.row(static_cast<Eigen::Index>(i)) = proposals.row(static_cast<Eigen::Index>(i));
        ensemble.log_likelihood[i] = ll_new[i];
        lp_cur[i] = lp_new[i];
        ++accepted;
      }
    }
    stats.accepted += accepted;
    stats.proposed += count;
  }
  return stats;
}

SmcResult smc_run(const PriorSampler& prior_sampler, const LogDensity& log_prior,
                  const LogDensityBatch& log_likelihood, const SmcOptions& options) {
  const std::size_t n = options.n_particles;
  if (n < 2) throw std::invalid_argument("smc_run: need at least 2 particles");
  if (!(options.ess_threshold_ratio > 0.0 && options.ess_threshold_ratio <= 1.0)) {
    throw std::invalid_argument("smc_run: ess_threshold_ratio must lie in (0, 1]");
  }
  if (options.mutation_steps < 0) throw std::invalid_argument("smc_run: mutation_steps must be >= 0");
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const bool parallel = options.exec == Execution::parallel;

  SmcResult result;
  auto& ens = result.ensemble;
  {
    std::vector<Vector> draws(n);
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (long i = 0; i < count; ++i) {
      auto rng = particle_rng(options.seed, 0, static_cast<std::uint64_t>(i), kPurposeInit);
      draws[static_cast<std::size_t>(i)] = prior_sampler(rng);
    }
    const auto d = draws.front().size();
    ens.theta.resize(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i) ens.theta.row(static_cast<Eigen::Index>(i)) = draws[i].transpose();
  }
  ens.weights.assign(n, 1.0 / static_cast<double>(n));
  ens.log_likelihood = log_likelihood(ens.theta);
  check_loglikes(ens.log_likelihood, n);
  ens.phi = 0.0;
  ens.ess = static_cast<double>(n);
  ens.stage = 0;
  result.stages.push_back({0, 0.0, 0.0, ens.ess, false, 0.0, elapsed()});

  const double target = options.ess_threshold_ratio * static_cast<double>(n);
  const double scale = 2.38 * 2.38 / static_cast<double>(ens.dim());
  while (ens.phi < 1.0) {
    if (ens.stage >= options.max_stages) {
      throw SamplerError(SamplerError::Where::stage, static_cast<std::size_t>(ens.stage),
                         "tempering did not reach phi = 1 within the stage limit");
    }
    ++ens.stage;
    const double remaining = 1.0 - ens.phi;
    const double delta = next_phi(ens, ens.log_likelihood, target);
    reweight(ens, ens.log_likelihood, delta);
    const bool limited = delta < remaining;
    ens.phi = limited ? ens.phi + delta : 1.0;

    StageRecord rec{ens.stage, ens.phi, delta, ens.ess, false, 0.0, 0.0};
    // A step cut short by the ESS bound has driven the ESS down to the
    // threshold, which is the resampling trigger.
    const bool uniform = ens.ess >= static_cast<double>(n) * (1.0 - 1e-12);
    const bool finish = ens.phi == 1.0 && options.final_resample && !uniform;
    if (limited || ens.ess < target || finish) {
      Matrix cov = scale * weighted_covariance(ens.theta, ens.weights);
      const auto stats = resample_and_mutate(ens, log_prior, log_likelihood, options.mutation_steps,
                                             options.seed, cov, options.exec);
      rec.resampled = true;
      rec.acceptance_rate = stats.acceptance_rate();
    }
    rec.elapsed_seconds = elapsed();
    result.stages.push_back(rec);
  }
  return result;
}

}  // namespace tps::samplers
