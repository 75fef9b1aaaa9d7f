// Serial references against their OpenMP kernels. Run with
//   OMP_NUM_THREADS=<n> ./bench_kernels
// to compare worker counts.

#include <benchmark/benchmark.h>

#include <random>

#include "tps/heatsim.hpp"
#include "tps/pinn.hpp"
#include "tps/samplers.hpp"

using namespace tps;

namespace {

std::vector<heatsim::MaterialSample> materials(std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> k(0.2, 1.0), c(1.0e6, 2.2e6);
  std::vector<heatsim::MaterialSample> out(n);
  for (auto& m : out) m = {k(rng), c(rng)};
  return out;
}

pinn::SurrogateModel model() { return pinn::initialize(pinn::TrainingConfig{}, heatsim::ThermalScenario{}); }

Execution exec_of(const benchmark::State& state) {
  return state.range(0) ? Execution::parallel : Execution::serial;
}

void BM_FdmBatch(benchmark::State& state) {
  heatsim::ThermalScenario s;
  const auto mats = materials(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    auto t = exec_of(state) == Execution::parallel ? heatsim::back_temperatures(s, mats)
                                                   : heatsim::back_temperatures_serial(s, mats);
    benchmark::DoNotOptimize(t.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_FdmBatch)->ArgsProduct({{0, 1}, {16}})->Unit(benchmark::kMillisecond);

void BM_PinnPredict(benchmark::State& state) {
  const auto m = model();
  const auto mats = materials(static_cast<std::size_t>(state.range(1)));
  const pinn::PredictOptions opt{.extrapolation_margin = 0.1, .exec = exec_of(state)};
  for (auto _ : state) {
    auto p = pinn::predict_back_temperature(m, mats, opt);
    benchmark::DoNotOptimize(p.celsius.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_PinnPredict)->ArgsProduct({{0, 1}, {1000, 10000}})->Unit(benchmark::kMicrosecond);

void BM_LossGradient(benchmark::State& state) {
  const auto m = model();
  pinn::TrainingConfig c;
  c.n_grid = static_cast<int>(state.range(1));
  c.n_ib = static_cast<int>(state.range(1));
  std::mt19937_64 rng(6);
  const auto set = pinn::sample_collocation(c, rng);
  for (auto _ : state) {
    auto g = pinn::total_loss_gradient(m, set, c.weights, exec_of(state));
    benchmark::DoNotOptimize(g.gradient.data());
  }
}
BENCHMARK(BM_LossGradient)->ArgsProduct({{0, 1}, {100, 1000}})->Unit(benchmark::kMillisecond);

void BM_SmcMutation(benchmark::State& state) {
  using samplers::Matrix;
  const auto m = model();
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto mats = materials(n);
  samplers::ParticleEnsemble base;
  base.theta.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    base.theta(static_cast<Eigen::Index>(i), 0) = mats[i].k;
    base.theta(static_cast<Eigen::Index>(i), 1) = mats[i].rho_cp;
  }
  base.weights.assign(n, 1.0 / static_cast<double>(n));
  base.phi = 0.5;
  const auto exec = exec_of(state);
  const samplers::LogDensityBatch like = [&](const Matrix& th) {
    std::vector<heatsim::MaterialSample> q(static_cast<std::size_t>(th.rows()));
    for (Eigen::Index i = 0; i < th.rows(); ++i) q[static_cast<std::size_t>(i)] = {th(i, 0), th(i, 1)};
    auto p = pinn::predict_back_temperature(m, q, {.extrapolation_margin = 0.1, .exec = exec});
    for (double& t : p.celsius) t = std::isnan(t) ? -1e300 : -0.5 * (t - 240.0) * (t - 240.0) / 25.0;
    return p.celsius;
  };
  const samplers::LogDensity prior = [](const samplers::Vector& v) {
    return v[0] > 0.1 && v[0] < 1.0 && v[1] > 0.8e6 && v[1] < 2.4e6 ? 0.0 : -INFINITY;
  };
  base.log_likelihood = like(base.theta);
  Matrix cov = Matrix::Zero(2, 2);
  cov(0, 0) = 1e-3;
  cov(1, 1) = 1e9;
  for (auto _ : state) {
    auto e = base;
    auto stats = samplers::resample_and_mutate(e, prior, like, 5, 11, cov, exec);
    benchmark::DoNotOptimize(stats.accepted);
  }
}
BENCHMARK(BM_SmcMutation)->ArgsProduct({{0, 1}, {10000}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
