#pragma once

// One-dimensional transient conduction through a TPS slab.
//
//   dT/dt = k/(rho*cp) d2T/dx2,   0 < x < L
//   dT/dx(0, t) = 0               (insulated back face)
//   dT/dx(L, t) = +Q/k            (applied heating flux)
//   T(x, 0)     = T_init
//
// Solvers work on the normalized variables T' = T/T_norm, x' = x/L and
// t' = t/t_final and report physical units.

#include <cstddef>
#include <span>
#include <vector>

namespace tps::heatsim {

struct ThermalScenario {
  double flux = 10000.0;     ///< W/m^2
  double thickness = 0.007;  ///< m
  double t_final = 300.0;    ///< s
  double t_init = 25.0;      ///< deg C
  double t_norm = 100.0;     ///< deg C
  int n_x = 100;             ///< nodes, both faces included
  double cfl = 0.2;          ///< explicit Courant factor alpha*dt/dx^2
  int n_t_implicit = 0;      ///< implicit steps; 0 means n_x
  int n_t_save = 100;        ///< explicit rows kept (plus the initial row)

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
  int implicit_steps() const { return n_t_implicit > 0 ? n_t_implicit : n_x; }
};

struct MaterialSample {
  double k = 0.0;       ///< W/(m K)
  double rho_cp = 0.0;  ///< J/(m^3 K)

  double diffusivity() const { return k / rho_cp; }
  void validate() const;
};

/// Row-major (time, space) grid of temperatures in deg C.
struct TemperatureField {
  std::size_t n_rows = 0;
  std::size_t n_x = 0;
  double dx = 0.0;  ///< m
  double dt = 0.0;  ///< s between stored rows
  std::vector<double> values;

  double at(std::size_t row, std::size_t i) const { return values[row * n_x + i]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * n_x, n_x};
  }
  double time(std::size_t r) const { return static_cast<double>(r) * dt; }
  double position(std::size_t i) const { return static_cast<double>(i) * dx; }
  /// Trapezoidal spatial mean of row r.
  double mean(std::size_t r) const;
};

/// Forward-Euler update with ghost-node closure at both faces.
TemperatureField solve_explicit(const ThermalScenario& scenario, const MaterialSample& mat);

/// Backward Euler, one Thomas solve per step, same boundary closure.
TemperatureField solve_implicit(const ThermalScenario& scenario, const MaterialSample& mat);

/// Cosine-series solution for the constant-flux / insulated slab.
double analytic_reference(const ThermalScenario& scenario, const MaterialSample& mat, double x,
                          double t, int n_terms);

/// Temperature at x = 0 in the last stored row.
double back_temperature(const TemperatureField& field);

/// Explicit-scheme back temperature at t_final without storing the field.
double explicit_back_temperature(const ThermalScenario& scenario, const MaterialSample& mat);

/// Explicit back temperatures for a batch of materials. OpenMP over the batch.
std::vector<double> back_temperatures(const ThermalScenario& scenario,
                                      std::span<const MaterialSample> mats);

/// Serial reference for back_temperatures().
std::vector<double> back_temperatures_serial(const ThermalScenario& scenario,
                                             std::span<const MaterialSample> mats);

/// Dimensionless diffusion group alpha * t_final / L^2.
double diffusion_number(const ThermalScenario& scenario, const MaterialSample& mat);

/// Normalized surface gradient Q*L/(k*T_norm).
double normalized_flux_gradient(const ThermalScenario& scenario, const MaterialSample& mat);

}  // namespace tps::heatsim
