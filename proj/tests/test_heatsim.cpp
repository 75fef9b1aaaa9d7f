#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "tps/heatsim.hpp"

using namespace tps::heatsim;

namespace {

const MaterialSample kValidation{0.65, 1509.0 * 1050.0};

// Constant flux q into x = L of a slab insulated at x = 0, summed from the
// textbook cosine series independently of the library implementation.
double slab_oracle(const ThermalScenario& s, const MaterialSample& m, double x, double t) {
  const double L = s.thickness, q = s.flux, k = m.k, a = m.diffusivity();
  const double pi = std::numbers::pi;
  double series = 0.0;
  for (int n = 1; n <= 400; ++n) {
    const double sign = (n % 2) ? -1.0 : 1.0;
    series += sign / (n * n) * std::exp(-a * n * n * pi * pi * t / (L * L)) * std::cos(n * pi * x / L);
  }
  return s.t_init + q * t / (m.rho_cp * L) +
         q * L / k * ((3.0 * x * x - L * L) / (6.0 * L * L) - 2.0 / (pi * pi) * series);
}

}  // namespace

TEST_CASE("analytic reference matches the independent series and the late-time asymptote") {
  ThermalScenario s;
  for (double t : {5.0, 50.0, 100.0, 300.0}) {
    for (double x : {0.0, 0.0035, 0.007}) {
      CHECK(analytic_reference(s, kValidation, x, t, 200) == doctest::Approx(slab_oracle(s, kValidation, x, t)).epsilon(1e-9));
    }
  }
  // Hand-computed value of the back face at t = 100 s.
  CHECK(analytic_reference(s, kValidation, 0.0, 100.0, 200) == doctest::Approx(97.22).epsilon(1e-4));
  // Once the transient has died out the profile rises linearly in time.
  const double t = 300.0;
  const double asym = s.t_init + s.flux * t / (kValidation.rho_cp * s.thickness) -
                      s.flux * s.thickness / (6.0 * kValidation.k);
  CHECK(analytic_reference(s, kValidation, 0.0, t, 200) == doctest::Approx(asym).epsilon(1e-6));
}

TEST_CASE("explicit solver tracks the analytic back temperature on the validation case") {
  ThermalScenario s;
  const auto f = solve_explicit(s, kValidation);
  REQUIRE(f.n_rows == static_cast<std::size_t>(s.n_t_save) + 1);
  REQUIRE(f.n_x == static_cast<std::size_t>(s.n_x));
  CHECK(f.time(f.n_rows - 1) == doctest::Approx(s.t_final).epsilon(1e-12));
  double worst = 0.0;
  for (std::size_t r = 0; r < f.n_rows; ++r) {
    worst = std::max(worst, std::abs(f.at(r, 0) - slab_oracle(s, kValidation, 0.0, f.time(r))));
  }
  CHECK(worst < 0.5);
}

TEST_CASE("energy stored equals energy supplied on every row") {
  ThermalScenario s;
  for (const auto& m : {kValidation, MaterialSample{0.2, 2.0e6}, MaterialSample{1.2, 0.9e6}}) {
    for (const auto& f : {solve_explicit(s, m), solve_implicit(s, m)}) {
      for (std::size_t r = 1; r < f.n_rows; ++r) {
        const double stored = m.rho_cp * s.thickness * (f.mean(r) - s.t_init);
        const double supplied = s.flux * f.time(r);
        CHECK(stored == doctest::Approx(supplied).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero flux leaves the slab at the initial temperature") {
  ThermalScenario s;
  s.flux = 0.0;
  // The explicit stencil of a flat profile is exactly zero; the Thomas solve
  // only reproduces it to rounding.
  for (double v : solve_explicit(s, kValidation).values) CHECK(v == 25.0);
  for (double v : solve_implicit(s, kValidation).values) CHECK(std::abs(v - 25.0) <= 1e-10);
}

TEST_CASE("explicit scheme converges at second order in space") {
  ThermalScenario s;
  s.t_final = 20.0;  // keep the transient alive so spatial error dominates
  const double exact = slab_oracle(s, kValidation, 0.0, s.t_final);
  std::vector<double> err;
  for (int n : {11, 21, 41}) {
    s.n_x = n;
    const auto f = solve_explicit(s, kValidation);
    err.push_back(std::abs(f.at(f.n_rows - 1, 0) - exact));
  }
  // dx halves while n_x - 1 doubles.
  const double p1 = std::log2(err[0] / err[1]);
  const double p2 = std::log2(err[1] / err[2]);
  CHECK(p1 >= 1.5);
  CHECK(p2 >= 1.5);
}

TEST_CASE("implicit scheme approaches the explicit one as its step shrinks") {
  ThermalScenario s;
  const double ref = explicit_back_temperature(s, kValidation);
  double prev = 1e9;
  for (int steps : {25, 100, 400}) {
    s.n_t_implicit = steps;
    const double err = std::abs(back_temperature(solve_implicit(s, kValidation)) - ref);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("storage-free back temperature is bitwise identical to the field path") {
  ThermalScenario s;
  for (const auto& m : {kValidation, MaterialSample{0.1, 2.4e6}, MaterialSample{1.3, 0.8e6}}) {
    CHECK(explicit_back_temperature(s, m) == back_temperature(solve_explicit(s, m)));
  }
}

TEST_CASE("parallel batch equals the serial reference exactly") {
  ThermalScenario s;
  s.n_x = 40;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> k(0.1, 1.3), c(0.8e6, 2.4e6);
  std::vector<MaterialSample> mats(37);
  for (auto& m : mats) m = {k(rng), c(rng)};
  const auto a = back_temperatures(s, mats);
  const auto b = back_temperatures_serial(s, mats);
  REQUIRE(a.size() == mats.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("back temperature rises with conductivity and falls with heat capacity") {
  ThermalScenario s;
  s.n_x = 40;
  CHECK(explicit_back_temperature(s, {0.3, 1.5e6}) < explicit_back_temperature(s, {0.6, 1.5e6}));
  CHECK(explicit_back_temperature(s, {0.6, 1.0e6}) > explicit_back_temperature(s, {0.6, 2.0e6}));
}

TEST_CASE("dimensionless groups") {
  ThermalScenario s;
  CHECK(diffusion_number(s, kValidation) ==
        doctest::Approx(kValidation.diffusivity() * 300.0 / (0.007 * 0.007)));
  CHECK(normalized_flux_gradient(s, kValidation) == doctest::Approx(1e4 * 0.007 / (0.65 * 100.0)));
}

TEST_CASE("invalid inputs are rejected") {
  ThermalScenario s;
  SUBCASE("cfl above the stability limit") {
    s.cfl = 0.6;
    CHECK_THROWS_AS(solve_explicit(s, kValidation), std::invalid_argument);
  }
  SUBCASE("too few nodes") {
    s.n_x = 2;
    CHECK_THROWS_AS(solve_implicit(s, kValidation), std::invalid_argument);
  }
  SUBCASE("non-positive conductivity") {
    CHECK_THROWS_AS(solve_explicit(s, {0.0, 1e6}), std::invalid_argument);
    CHECK_THROWS_AS(back_temperatures(s, std::vector<MaterialSample>{{0.5, 1e6}, {-1.0, 1e6}}),
                    std::invalid_argument);
  }
  SUBCASE("empty field") { CHECK_THROWS_AS(back_temperature(TemperatureField{}), std::invalid_argument); }
}
