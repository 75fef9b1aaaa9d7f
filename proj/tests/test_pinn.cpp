#include <doctest.h>

#include <cmath>
#include <random>

#include "tps/pinn.hpp"

using namespace tps;
using namespace tps::pinn;

namespace {

TrainingConfig small_config() {
  TrainingConfig c;
  c.hidden = {6, 6};
  c.n_grid = 20;
  c.n_ib = 16;
  c.epochs = 30;
  c.seed = 17;
  return c;
}

CollocationSet small_set(const TrainingConfig& c) {
  std::mt19937_64 rng(4);
  return sample_collocation(c, rng);
}

}  // namespace

TEST_CASE("collocation points respect counts and ranges") {
  TrainingConfig c;
  std::mt19937_64 rng(1);
  const auto set = sample_collocation(c, rng);
  CHECK(set.physics.size() == 100);
  CHECK(set.initial.size() == 50);
  CHECK(set.boundary.size() == 50);
  for (const auto& p : set.physics) {
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 1.0);
    CHECK(p.t >= 0.0);
    CHECK(p.t <= 1.0);
    CHECK(c.k_range.contains(p.mat.k));
    CHECK(c.rho_cp_range.contains(p.mat.rho_cp));
  }
  c.n_ib = 7;
  CHECK(c.n_initial() + c.n_boundary() == 7);
}

TEST_CASE("a constant network has closed-form losses") {
  const auto c = small_config();
  SurrogateModel m = initialize(c, heatsim::ThermalScenario{});
  for (double& p : m.net.parameters()) p = 0.0;
  m.net.biases(m.net.n_layers() - 1)[0] = m.initial_value();
  const auto set = small_set(c);
  CHECK(physics_loss(m, set.physics) == 0.0);
  CHECK(initial_loss(m, set.initial) == 0.0);
  double expect = 0.0;
  for (const auto& b : set.boundary) expect += std::pow(m.flux_gradient(b.mat), 2);
  expect /= static_cast<double>(set.boundary.size());
  CHECK(boundary_loss(m, set.boundary) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("batched total-loss gradient matches the loss terms and central differences") {
  const auto c = small_config();
  SurrogateModel m = initialize(c, heatsim::ThermalScenario{});
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 0.2);
  for (double& p : m.net.parameters()) p += g(rng);
  const auto set = small_set(c);
  const LossWeights w{1.3, 0.7, 2.0};

  const auto lg = total_loss_gradient(m, set, w, Execution::serial);
  const auto ref = total_loss(m, set, w);
  CHECK(lg.loss.total == doctest::Approx(ref.total).epsilon(1e-12));
  CHECK(lg.loss.physics == doctest::Approx(ref.physics).epsilon(1e-12));
  CHECK(lg.loss.initial == doctest::Approx(ref.initial).epsilon(1e-12));
  CHECK(lg.loss.boundary == doctest::Approx(ref.boundary).epsilon(1e-12));

  for (std::size_t p = 0; p < m.net.parameter_count(); ++p) {
    const double h = 1e-6;
    const double keep = m.net.parameters()[p];
    m.net.parameters()[p] = keep + h;
    const double up = total_loss(m, set, w).total;
    m.net.parameters()[p] = keep - h;
    const double down = total_loss(m, set, w).total;
    m.net.parameters()[p] = keep;
    const double fd = (up - down) / (2 * h);
    CHECK_MESSAGE(std::abs(lg.gradient[p] - fd) <= std::max(1e-4 * std::abs(fd), 1e-6),
                  "parameter " << p << ": " << lg.gradient[p] << " vs " << fd);
  }

  const auto par = total_loss_gradient(m, set, w, Execution::parallel);
  for (std::size_t p = 0; p < m.net.parameter_count(); ++p) {
    CHECK(par.gradient[p] == doctest::Approx(lg.gradient[p]).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  auto c = small_config();
  c.epochs = 300;
  const heatsim::ThermalScenario s;
  const auto a = train(c, s);
  const auto b = train(c, s);
  REQUIRE(a.history.size() == 300);
  CHECK(a.net == b.net);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].epoch == static_cast<int>(i) + 1);
    CHECK(a.history[i].total == b.history[i].total);
  }
  double first = 1e300, last = 1e300;
  for (std::size_t i = 0; i < 30; ++i) first = std::min(first, a.history[i].total);
  for (std::size_t i = 270; i < 300; ++i) last = std::min(last, a.history[i].total);
  CHECK(last < first);

  c.epochs = 1;
  CHECK(train(c, s).history.size() == 1);
  c.epochs = 0;
  CHECK(train(c, s).history.empty());
}

TEST_CASE("a learning-rate schedule changes the trajectory but not the start") {
  auto c = small_config();
  const heatsim::ThermalScenario s;
  const auto fixed = train(c, s);
  c.final_learning_rate = 1e-4;
  const auto decayed = train(c, s);
  CHECK(fixed.history[0].total == decayed.history[0].total);
  CHECK(fixed.history[1].total == decayed.history[1].total);  // first step still uses lr
  CHECK_FALSE(fixed.net == decayed.net);
}

TEST_CASE("divergence is reported with its epoch") {
  auto c = small_config();
  heatsim::ThermalScenario s;
  s.t_norm = 1e-320;  // flux gradient overflows
  try {
    (void)train(c, s);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("invalid training configurations are rejected") {
  auto c = small_config();
  const heatsim::ThermalScenario s;
  SUBCASE("no hidden layers") { c.hidden.clear(); }
  SUBCASE("bad learning rate") { c.learning_rate = 0.0; }
  SUBCASE("inverted range") { c.k_range = {1.0, 0.5}; }
  SUBCASE("too few boundary points") { c.n_ib = 1; }
  CHECK_THROWS_AS(train(c, s), std::invalid_argument);
}

TEST_CASE("prediction flags extrapolation and refuses far-out inputs") {
  const auto m = initialize(small_config(), heatsim::ThermalScenario{});
  const std::vector<heatsim::MaterialSample> mats{{0.5, 1.5e6}, {1.35, 1.5e6}, {3.0, 1.5e6}, {0.5, 0.1e6}};
  const auto p = predict_back_temperature(m, mats);
  CHECK(p.status[0] == PredictStatus::ok);
  CHECK(p.status[1] == PredictStatus::extrapolated);
  CHECK(p.status[2] == PredictStatus::out_of_range);
  CHECK(p.status[3] == PredictStatus::out_of_range);
  CHECK(std::isfinite(p.celsius[0]));
  CHECK(std::isfinite(p.celsius[1]));
  CHECK(std::isnan(p.celsius[2]));
  CHECK(std::isnan(p.celsius[3]));

  // Back-face prediction equals the (x'=0, t'=1) corner of the field.
  const auto field = predict_field(m, mats[0], 5, 7);
  REQUIRE(field.size() == 35);
  CHECK(field[4 * 7] == doctest::Approx(p.celsius[0]).epsilon(1e-13));
  const auto serial = predict_back_temperature(m, mats, {.extrapolation_margin = 0.1, .exec = Execution::serial});
  CHECK(serial.celsius[0] == p.celsius[0]);
}

TEST_CASE("weights round-trip exactly through the text format") {
  auto c = small_config();
  c.epochs = 5;
  const auto m = train(c, heatsim::ThermalScenario{});
  const auto text = to_text(m);
  const auto back = from_text(text);
  CHECK(back.net == m.net);
  CHECK(back.k_range == m.k_range);
  CHECK(back.rho_cp_range == m.rho_cp_range);
  CHECK(back.scenario.flux == m.scenario.flux);
  CHECK(back.scenario.t_final == m.scenario.t_final);
  CHECK(to_text(back) == text);
}

TEST_CASE("malformed weights name the broken section") {
  const auto m = initialize(small_config(), heatsim::ThermalScenario{});
  const auto text = to_text(m);
  SUBCASE("truncated before the second layer") {
    const auto cut = text.substr(0, text.find("weights 1"));
    try {
      (void)from_text(cut);
      FAIL("expected WeightsFormatError");
    } catch (const WeightsFormatError& e) {
      CHECK(e.section() == "weights 1");
    }
  }
  SUBCASE("unsupported version") {
    auto bad = text;
    bad.replace(bad.find("version 1"), 9, "version 9");
    try {
      (void)from_text(bad);
      FAIL("expected WeightsFormatError");
    } catch (const WeightsFormatError& e) {
      CHECK(e.section() == "version");
    }
  }
  SUBCASE("garbage number") {
    auto bad = text;
    const auto pos = bad.find('\n', bad.find("biases 0")) + 1;
    bad.replace(pos, 1, "x");
    CHECK_THROWS_AS(from_text(bad), WeightsFormatError);
  }
}
