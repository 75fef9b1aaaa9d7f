// Acceptance suite. Each test case covers one criterion and prints a single
// "[PASS]" or "[FAIL]" line with the measured numbers. Trained surrogates are
// cached under TPS_CACHE_DIR keyed by their training configuration, so only
// the first run pays for training.

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "tps/cli/commands.hpp"
#include "tps/cli/config.hpp"
#include "tps/heatsim.hpp"
#include "tps/mlp.hpp"
#include "tps/pinn.hpp"
#include "tps/samplers.hpp"

using namespace tps;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void verdict(int n, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

cli::RunConfig load_repo_config(const std::string& name) {
  return cli::load_config(fs::path(TPS_SOURCE_DIR) / "configs" / name);
}

struct CachedModel {
  pinn::SurrogateModel model;
  double train_seconds = 0.0;
  bool from_cache = false;
};

CachedModel cached_model(const std::string& name, const cli::RunConfig& config) {
  const auto j = cli::to_json(config);
  const std::string key = j["training"].dump() + j["scenario"].dump();
  std::ostringstream hex;
  hex << std::hex << std::hash<std::string>{}(key);
  const fs::path dir(TPS_CACHE_DIR);
  fs::create_directories(dir);
  const auto path = dir / (name + "_" + hex.str() + ".txt");
  const auto secs_path = path.string() + ".seconds";
  CachedModel out;
  if (fs::exists(path) && fs::exists(secs_path)) {
    out.model = pinn::load_weights(path);
    std::ifstream(secs_path) >> out.train_seconds;
    out.from_cache = true;
    return out;
  }
  const auto t0 = Clock::now();
  out.model = pinn::train(config.training, config.scenario);
  out.train_seconds = since(t0);
  pinn::save_weights(out.model, path);
  std::ofstream(secs_path) << out.train_seconds << '\n';
  return out;
}

fs::path work_dir(const std::string& name) {
  const auto dir = fs::path(TPS_CACHE_DIR) / "runs" / name;
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("criterion 1: FDM oracle agreement") {
  const auto cfg = load_repo_config("reference.json");
  const auto& s = cfg.scenario;
  const auto& mat = cfg.validation;
  REQUIRE(mat.k == 0.65);
  REQUIRE(mat.rho_cp == doctest::Approx(1509.0 * 1050.0));
  REQUIRE(s.flux == 1e4);
  REQUIRE(s.thickness == 0.007);
  REQUIRE(s.n_x == 100);
  REQUIRE(s.cfl == 0.2);

  const auto t0 = Clock::now();
  const auto f = heatsim::solve_explicit(s, mat);
  const double secs = since(t0);
  double worst = 0.0;
  for (std::size_t r = 0; r < f.n_rows; ++r) {
    const double exact = heatsim::analytic_reference(s, mat, 0.0, f.time(r), 400);
    worst = std::max(worst, std::abs(f.at(r, 0) - exact));
  }
  double energy = 0.0;
  for (std::size_t r = 1; r < f.n_rows; ++r) {
    const double stored = mat.rho_cp * s.thickness * (f.mean(r) - s.t_init);
    energy = std::max(energy, std::abs(stored - s.flux * f.time(r)) / (s.flux * f.time(r)));
  }
  CHECK(worst <= 0.5);
  CHECK(energy <= 0.01);
  CHECK(secs < 1.0);
  verdict(1, worst <= 0.5 && energy <= 0.01 && secs < 1.0,
          fmt("max |T_back - analytic| = %.4f C (<= 0.5), energy balance %.2e (<= 1e-2), solve %.3f s (< 1)",
              worst, energy, secs));
}

TEST_CASE("criterion 2: autodiff correctness") {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240517);
  double worst_grad = 0.0, worst_input = 0.0;
  bool grad_ok = true, input_ok = true;
  const heatsim::ThermalScenario scenario;
  for (int trial = 0; trial < 20; ++trial) {
    pinn::TrainingConfig tc;
    std::uniform_int_distribution<int> width(3, 8), depth(1, 3);
    tc.hidden.assign(static_cast<std::size_t>(depth(rng)), 0);
    for (auto& h : tc.hidden) h = static_cast<std::size_t>(width(rng));
    tc.n_grid = 12;
    tc.n_ib = 10;
    tc.seed = rng();
    auto model = pinn::initialize(tc, scenario);
    std::normal_distribution<double> g(0.0, 0.3);
    for (double& p : model.net.parameters()) p += g(rng);
    const auto set = pinn::sample_collocation(tc, rng);
    const pinn::LossWeights w{1.0, 1.0, 1.0};

    const auto lg = pinn::total_loss_gradient(model, set, w, Execution::serial);
    for (std::size_t p = 0; p < model.net.parameter_count(); ++p) {
      const double h = 1e-6;
      const double keep = model.net.parameters()[p];
      model.net.parameters()[p] = keep + h;
      const double up = pinn::total_loss(model, set, w).total;
      model.net.parameters()[p] = keep - h;
      const double down = pinn::total_loss(model, set, w).total;
      model.net.parameters()[p] = keep;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(lg.gradient[p] - fd);
      const double tol = std::max(1e-4 * std::abs(fd), 1e-6);
      worst_grad = std::max(worst_grad, err / tol);
      grad_ok = grad_ok && err <= tol;
    }

    // Input derivatives at a random collocation point, fourth-order stencils.
    const auto& pt = set.physics.front();
    const auto in = model.inputs(pt.x, pt.t, pt.mat);
    const auto d = ad::input_derivatives(model.net, in[0], in[1], std::span(in).subspan(2));
    const auto f = [&](double x, double t) {
      auto q = in;
      q[0] = x;
      q[1] = t;
      return ad::forward(model.net, q);
    };
    const double h = 1e-3;
    const auto d1 = [&](auto fn) { return (-fn(2 * h) + 8 * fn(h) - 8 * fn(-h) + fn(-2 * h)) / (12 * h); };
    const auto d2 = [&](auto fn) {
      return (-fn(2 * h) + 16 * fn(h) - 30 * fn(0.0) + 16 * fn(-h) - fn(-2 * h)) / (12 * h * h);
    };
    const auto ax = [&](double e) { return f(in[0] + e, in[1]); };
    const auto at = [&](double e) { return f(in[0], in[1] + e); };
    for (const auto& [a, b] : {std::pair{d.du_dx, d1(ax)}, std::pair{d.du_dt, d1(at)}, std::pair{d.d2u_dx2, d2(ax)}}) {
      const double rel = std::abs(a - b) / std::max(std::abs(b), 1e-3);
      worst_input = std::max(worst_input, rel);
      input_ok = input_ok && rel <= 1e-5;
    }
  }
  const double secs = since(t0);
  CHECK(grad_ok);
  CHECK(input_ok);
  CHECK(secs < 60.0);
  verdict(2, grad_ok && input_ok && secs < 60.0,
          fmt("20 random nets: worst gradient error %.3f of tolerance, worst input-derivative relative "
              "error %.2e (<= 1e-5), %.2f s",
              worst_grad, worst_input, secs));
}

TEST_CASE("criterion 3: surrogate accuracy") {
  const auto cfg = load_repo_config("reference.json");
  const auto& t = cfg.training;
  REQUIRE(t.hidden == std::vector<std::size_t>{30, 30, 30});
  REQUIRE(t.learning_rate == 0.006);
  REQUIRE(t.epochs == 2000);
  REQUIRE(t.n_grid == 100);
  REQUIRE(t.n_ib == 100);
  const auto m = cached_model("reference", cfg);
  const auto cmp = cli::validate_model(cfg, m.model);
  const bool fast = m.train_seconds <= 15 * 60;
  CHECK(cmp.rmse <= 10.0);
  CHECK(fast);
  verdict(3, cmp.rmse <= 10.0 && fast,
          fmt("full-field RMSE %.3f C (<= 10), max error %.2f C at t = %.1f s, training %.1f s%s (<= 900)",
              cmp.rmse, cmp.max_abs_error, cmp.t_at_max, m.train_seconds, m.from_cache ? " [cached]" : ""));
}

TEST_CASE("criterion 4: sampler oracles") {
  using samplers::Matrix;
  using samplers::Vector;
  const auto t0 = Clock::now();

  const samplers::LogDensity normal = [](const Vector& v) { return -0.5 * v.squaredNorm(); };
  const auto mh = samplers::mh_run(normal, Vector::Zero(2), Matrix::Identity(2, 2), 50000, 31);
  const Vector mean = mh.samples.colwise().mean();
  const Matrix c = mh.samples.rowwise() - mean.transpose();
  const Vector sd = (c.array().square().colwise().sum() / 49999.0).sqrt();
  const bool mh_ok = std::abs(mean[0]) <= 0.05 && std::abs(mean[1]) <= 0.05 &&
                     std::abs(sd[0] - 1.0) <= 0.1 && std::abs(sd[1] - 1.0) <= 0.1;

  // theta ~ N(1, 2^2), y_j ~ N(theta, 0.8^2)
  const double m0 = 1.0, s0 = 2.0, s = 0.8;
  const std::vector<double> y{3.1, 2.6, 3.4, 2.9};
  const double pv = 1.0 / (1.0 / (s0 * s0) + static_cast<double>(y.size()) / (s * s));
  const double pm = pv * (m0 / (s0 * s0) + (3.1 + 2.6 + 3.4 + 2.9) / (s * s));
  samplers::SmcOptions opt;
  opt.n_particles = 2000;
  opt.seed = 2718;
  const auto smc = samplers::smc_run(
      [&](std::mt19937_64& r) {
        Vector v(1);
        v[0] = std::normal_distribution<double>(m0, s0)(r);
        return v;
      },
      [&](const Vector& th) { return -0.5 * std::pow((th[0] - m0) / s0, 2); },
      [&](const Matrix& th) {
        std::vector<double> out(static_cast<std::size_t>(th.rows()), 0.0);
        for (Eigen::Index i = 0; i < th.rows(); ++i) {
          for (double v : y) out[static_cast<std::size_t>(i)] += -0.5 * std::pow((v - th(i, 0)) / s, 2);
        }
        return out;
      },
      opt);
  double sm = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < smc.ensemble.size(); ++i) {
    const double v = smc.ensemble.theta(static_cast<Eigen::Index>(i), 0);
    sm += smc.ensemble.weights[i] * v;
    s2 += smc.ensemble.weights[i] * v * v;
  }
  const double ssd = std::sqrt(s2 - sm * sm);
  const double mean_err = std::abs(sm - pm) / pm;
  const double sd_err = std::abs(ssd - std::sqrt(pv)) / std::sqrt(pv);
  const bool smc_ok = mean_err <= 0.02 && sd_err <= 0.05;
  const double secs = since(t0);
  CHECK(mh_ok);
  CHECK(smc_ok);
  CHECK(secs < 60.0);
  verdict(4, mh_ok && smc_ok && secs < 60.0,
          fmt("MH mean (%.4f, %.4f) sd (%.4f, %.4f); SMC mean error %.2f%% (<= 2), sd error %.2f%% (<= 5); %.2f s",
              mean[0], mean[1], sd[0], sd[1], 100 * mean_err, 100 * sd_err, secs));
}

TEST_CASE("criterion 5: reliability round trip") {
  auto cfg = load_repo_config("sampling.json");
  cfg.sampler.n_particles = 10000;
  const auto m = cached_model("sampling", cfg);
  const auto t0 = Clock::now();

  std::vector<cli::LevelSummary> levels;
  for (double r : {0.95, 0.99, 0.99999}) {
    auto c = cfg;
    c.output_dir = work_dir("criterion5");
    c.target.reliabilities = {r};
    // The extreme level cannot be resolved from 10^4 samples; a subsample
    // is enough for its mean.
    c.sampler.fdm_subsample = r > 0.999 ? 1000 : 0;
    levels.push_back(cli::sample_levels(c, m.model).front());
  }
  const auto& a = levels[0];
  const auto& b = levels[1];
  const auto& e = levels[2];
  const bool ok95 = std::abs(a.fdm_fraction - 0.95) <= 0.03;
  const bool ok99 = std::abs(b.fdm_fraction - 0.99) <= 0.008;
  const bool ordered = a.mean_t_back_fdm > b.mean_t_back_fdm && b.mean_t_back_fdm > e.mean_t_back_fdm;
  CHECK(a.n_fdm == 10000);
  CHECK(b.n_fdm == 10000);
  CHECK(ok95);
  CHECK(ok99);
  CHECK(ordered);
  verdict(5, ok95 && ok99 && ordered,
          fmt("FDM-verified fraction %.4f at R=0.95 (+-0.03), %.4f at R=0.99 (+-0.008); surrogate fractions "
              "%.4f / %.4f; mean T_back %.2f > %.2f > %.2f C; %.0f s sampling + verification",
              a.fdm_fraction, b.fdm_fraction, a.pinn_fraction, b.pinn_fraction, a.mean_t_back_fdm,
              b.mean_t_back_fdm, e.mean_t_back_fdm, since(t0)));
}

TEST_CASE("criterion 6: scaling behavior") {
  const auto cfg = load_repo_config("reference.json");
  const auto m = cached_model("reference", cfg);
  const std::vector<std::size_t> ms{1, 10, 100, 1000};
  const auto inf = cli::time_inference(cfg, m.model, ms, 5);
  const double pinn_ratio = inf[3].pinn_seconds / inf[0].pinn_seconds;
  bool fdm_linear = true;
  std::string decades;
  for (std::size_t i = 1; i < inf.size(); ++i) {
    const double r = inf[i].fdm_seconds / inf[i - 1].fdm_seconds;
    fdm_linear = fdm_linear && r >= 7.0 && r <= 13.0;
    decades += fmt("%s%.2f", i > 1 ? ", " : "", r);
  }
  const int maxw = max_workers();
  const std::vector<int> workers{1, maxw};
  const auto smc = cli::time_smc(cfg, m.model, workers, 10000, 5);
  const double smc_ratio = smc[1].seconds / smc[0].seconds;

  CHECK(pinn_ratio <= 20.0);
  CHECK(fdm_linear);
  CHECK(smc_ratio <= 0.6);
  verdict(6, pinn_ratio <= 20.0 && fdm_linear && smc_ratio <= 0.6,
          fmt("surrogate time(M=1000)/time(M=1) = %.2f (<= 20); FDM growth per decade [%s] (7..13); "
              "SMC %d workers / 1 worker = %.3f (<= 0.6) with %d core(s) available",
              pinn_ratio, decades.c_str(), maxw, smc_ratio, maxw));
}

TEST_CASE("criterion 7: constraint enforcement") {
  auto cfg = load_repo_config("reference.json");
  const auto m = cached_model("reference", cfg);
  cfg.output_dir = work_dir("criterion7");
  cfg.target.reliabilities = {0.95};
  cfg.sampler.n_particles = 10000;
  cfg.sampler.fdm_subsample = 10;
  const auto level = cli::sample_levels(cfg, m.model).front();
  CHECK(level.n_samples == 10000);
  CHECK(level.k_violations == 0);
  CHECK(level.max_k <= 1.0);
  verdict(7, level.n_samples == 10000 && level.k_violations == 0,
          fmt("%zu samples, %zu with k > 1.0, largest k = %.6f", level.n_samples, level.k_violations,
              level.max_k));
}
