#include "tps/heatsim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tps::heatsim {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Explicit step plan: an integer number of substeps per stored row, chosen
// so the effective Courant factor never exceeds the configured one.
struct ExplicitPlan {
  long substeps_per_row;
  double r;  // alpha dt / dx^2 actually used
};

ExplicitPlan plan_explicit(const ThermalScenario& s, const MaterialSample& m) {
  const double dxn = 1.0 / (s.n_x - 1);
  const double d = diffusion_number(s, m);
  const double dt_max = s.cfl * dxn * dxn / d;
  const double row_span = 1.0 / s.n_t_save;
  const auto substeps = static_cast<long>(std::ceil(row_span / dt_max - 1e-12));
  const long n = std::max(1L, substeps);
  const double dtn = row_span / static_cast<double>(n);
  return {n, d * dtn / (dxn * dxn)};
}

// One forward-Euler step on normalized temperatures. The ghost nodes
// u[-1] = u[1] and u[n] = u[n-2] + 2 dx g close both faces to second order.
inline void explicit_step(const std::vector<double>& u, std::vector<double>& next, double r,
                          double flux_term) {
  const std::size_t n = u.size();
  next[0] = u[0] + 2.0 * r * (u[1] - u[0]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    next[i] = u[i] + r * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
  }
  next[n - 1] = u[n - 1] + r * (2.0 * u[n - 2] - 2.0 * u[n - 1] + flux_term);
}

void check_inputs(const ThermalScenario& s, const MaterialSample& m) {
  s.validate();
  m.validate();
}

}  // namespace

void ThermalScenario::validate() const {
  require(std::isfinite(flux) && flux >= 0.0, "scenario: flux must be finite and >= 0");
  require(std::isfinite(thickness) && thickness > 0.0, "scenario: thickness must be > 0");
  require(std::isfinite(t_final) && t_final > 0.0, "scenario: t_final must be > 0");
  require(std::isfinite(t_init), "scenario: t_init must be finite");
  require(std::isfinite(t_norm) && t_norm > 0.0, "scenario: t_norm must be > 0");
  require(n_x >= 3, "scenario: n_x must be >= 3");
  require(std::isfinite(cfl) && cfl > 0.0 && cfl <= 0.5,
          "scenario: cfl must lie in (0, 0.5] for explicit stability");
  require(n_t_implicit >= 0, "scenario: n_t_implicit must be >= 0");
  require(n_t_save >= 1, "scenario: n_t_save must be >= 1");
}

void MaterialSample::validate() const {
  require(std::isfinite(k) && k > 0.0, "material: k must be finite and > 0");
  require(std::isfinite(rho_cp) && rho_cp > 0.0, "material: rho_cp must be finite and > 0");
  require(std::isfinite(diffusivity()) && diffusivity() > 0.0,
          "material: diffusivity must be finite and > 0");
}

double TemperatureField::mean(std::size_t r) const {
  const auto u = row(r);
  double sum = 0.5 * (u.front() + u.back());
  for (std::size_t i = 1; i + 1 < u.size(); ++i) sum += u[i];
  return sum / static_cast<double>(u.size() - 1);
}

double diffusion_number(const ThermalScenario& s, const MaterialSample& m) {
  return m.diffusivity() * s.t_final / (s.thickness * s.thickness);
}

double normalized_flux_gradient(const ThermalScenario& s, const MaterialSample& m) {
  return s.flux * s.thickness / (m.k * s.t_norm);
}

TemperatureField solve_explicit(const ThermalScenario& scenario, const MaterialSample& mat) {
  check_inputs(scenario, mat);
  const auto n = static_cast<std::size_t>(scenario.n_x);
  const auto plan = plan_explicit(scenario, mat);
  const double dxn = 1.0 / static_cast<double>(n - 1);
  const double flux_term = 2.0 * dxn * normalized_flux_gradient(scenario, mat);

  TemperatureField field;
  field.n_rows = static_cast<std::size_t>(scenario.n_t_save) + 1;
  field.n_x = n;
  field.dx = scenario.thickness / static_cast<double>(n - 1);
  field.dt = scenario.t_final / scenario.n_t_save;
  field.values.resize(field.n_rows * n);

  std::vector<double> u(n, scenario.t_init / scenario.t_norm);
  std::vector<double> next(n);
  auto store = [&](std::size_t row) {
    for (std::size_t i = 0; i < n; ++i) field.values[row * n + i] = u[i] * scenario.t_norm;
  };
  store(0);
  for (std::size_t row = 1; row < field.n_rows; ++row) {
    for (long s = 0; s < plan.substeps_per_row; ++s) {
      explicit_step(u, next, plan.r, flux_term);
      u.swap(next);
    }
    store(row);
  }
  return field;
}

double explicit_back_temperature(const ThermalScenario& scenario, const MaterialSample& mat) {
  check_inputs(scenario, mat);
  const auto n = static_cast<std::size_t>(scenario.n_x);
  const auto plan = plan_explicit(scenario, mat);
  const double dxn = 1.0 / static_cast<double>(n - 1);
  const double flux_term = 2.0 * dxn * normalized_flux_gradient(scenario, mat);

  std::vector<double> u(n, scenario.t_init / scenario.t_norm);
  std::vector<double> next(n);
  const long total = plan.substeps_per_row * scenario.n_t_save;
  for (long s = 0; s < total; ++s) {
    explicit_step(u, next, plan.r, flux_term);
    u.swap(next);
  }
  return u[0] * scenario.t_norm;
}

TemperatureField solve_implicit(const ThermalScenario& scenario, const MaterialSample& mat) {
  check_inputs(scenario, mat);
  const auto n = static_cast<std::size_t>(scenario.n_x);
  const int steps = scenario.implicit_steps();
  const double dxn = 1.0 / static_cast<double>(n - 1);
  const double r = diffusion_number(scenario, mat) * (1.0 / steps) / (dxn * dxn);
  const double flux_rhs = 2.0 * r * dxn * normalized_flux_gradient(scenario, mat);

  // (I - r A) u^{n+1} = u^n + b, with the ghost-node rows
  //   (1+2r) u0 - 2r u1            = u0^n
  //   -2r u_{n-2} + (1+2r) u_{n-1} = u_{n-1}^n + 2 r dx g
  // The matrix is constant, so the Thomas forward sweep is factored once.
  std::vector<double> lower(n, -r), diag(n, 1.0 + 2.0 * r), upper(n, -r);
  upper[0] = -2.0 * r;
  lower[n - 1] = -2.0 * r;
  std::vector<double> c_prime(n), inv_denom(n);
  inv_denom[0] = 1.0 / diag[0];
  c_prime[0] = upper[0] * inv_denom[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double denom = diag[i] - lower[i] * c_prime[i - 1];
    assert(denom != 0.0);
    inv_denom[i] = 1.0 / denom;
    c_prime[i] = upper[i] * inv_denom[i];
  }

  TemperatureField field;
  field.n_rows = static_cast<std::size_t>(steps) + 1;
  field.n_x = n;
  field.dx = scenario.thickness / static_cast<double>(n - 1);
  field.dt = scenario.t_final / steps;
  field.values.resize(field.n_rows * n);

  std::vector<double> u(n, scenario.t_init / scenario.t_norm);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) field.values[i] = u[i] * scenario.t_norm;
  for (int step = 1; step <= steps; ++step) {
    std::copy(u.begin(), u.end(), d.begin());
    d[n - 1] += flux_rhs;
    d[0] *= inv_denom[0];
    for (std::size_t i = 1; i < n; ++i) d[i] = (d[i] - lower[i] * d[i - 1]) * inv_denom[i];
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c_prime[i] * d[i + 1];
    u.swap(d);
    double* out = field.values.data() + static_cast<std::size_t>(step) * n;
    for (std::size_t i = 0; i < n; ++i) out[i] = u[i] * scenario.t_norm;
  }
  return field;
}

double analytic_reference(const ThermalScenario& scenario, const MaterialSample& mat, double x,
                          double t, int n_terms) {
  check_inputs(scenario, mat);
  require(n_terms >= 1, "analytic_reference: n_terms must be >= 1");
  require(std::isfinite(x) && std::isfinite(t) && t >= 0.0,
          "analytic_reference: x and t must be finite, t >= 0");
  const double len = scenario.thickness;
  const double fo = mat.diffusivity() * t / (len * len);
  const double pi = std::numbers::pi;
  double series = 0.0;
  for (int n = n_terms; n >= 1; --n) {
    const double nn = static_cast<double>(n);
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    series += sign / (nn * nn) * std::exp(-nn * nn * pi * pi * fo) * std::cos(nn * pi * x / len);
  }
  const double bracket =
      fo + (3.0 * x * x - len * len) / (6.0 * len * len) - 2.0 / (pi * pi) * series;
  return scenario.t_init + scenario.flux * len / mat.k * bracket;
}

double back_temperature(const TemperatureField& field) {
  if (field.n_rows == 0 || field.n_x == 0) throw std::invalid_argument("back_temperature: empty field");
  return field.at(field.n_rows - 1, 0);
}

std::vector<double> back_temperatures_serial(const ThermalScenario& scenario,
                                             std::span<const MaterialSample> mats) {
  std::vector<double> out(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) out[i] = explicit_back_temperature(scenario, mats[i]);
  return out;
}

std::vector<double> back_temperatures(const ThermalScenario& scenario,
                                      std::span<const MaterialSample> mats) {
  scenario.validate();
  for (const auto& m : mats) m.validate();
  std::vector<double> out(mats.size());
  const auto count = static_cast<long>(mats.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = explicit_back_temperature(scenario, mats[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace tps::heatsim
