#pragma once

// Parametric physics-informed surrogate of the slab conduction problem.
//
// Network inputs are (x', t', k_hat, c_hat): normalized position and time
// plus the two material parameters min-max scaled over the training range.
// The single output u approximates T/T_norm. In normalized coordinates the
// residual is
//   f = du/dt' - (alpha t_final / L^2) d2u/dx'2
// and the boundary targets are du/dx'(0) = 0, du/dx'(1) = Q L / (k T_norm).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tps/heatsim.hpp"
#include "tps/mlp.hpp"

namespace tps::pinn {

using heatsim::MaterialSample;
using heatsim::ThermalScenario;

struct ParamRange {
  double min = 0.0;
  double max = 1.0;

  double width() const { return max - min; }
  double scale(double v) const { return (v - min) / (max - min); }
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const ParamRange&) const = default;
};

struct LossWeights {
  double physics = 1.0;
  double initial = 1.0;
  double boundary = 1.0;
};

struct TrainingConfig {
  std::vector<std::size_t> hidden{30, 30, 30};
  int n_grid = 100;  ///< physics collocation points
  int n_ib = 100;    ///< initial + boundary points, split evenly
  LossWeights weights;
  double learning_rate = 0.006;
  /// Geometric decay to this rate by the last epoch; 0 keeps the rate fixed.
  double final_learning_rate = 0.0;
  int epochs = 2000;
  std::uint64_t seed = 20250101;
  ParamRange k_range{0.1, 1.3};
  ParamRange rho_cp_range{0.8e6, 2.4e6};
  bool resample_each_epoch = false;

  void validate() const;
  int n_initial() const { return n_ib / 2; }
  int n_boundary() const { return n_ib - n_ib / 2; }
};

struct LossRecord {
  int epoch = 0;
  double total = 0.0;
  double physics = 0.0;
  double initial = 0.0;
  double boundary = 0.0;
};

struct SurrogateModel {
  ad::MlpNetwork net;
  ThermalScenario scenario;
  ParamRange k_range{0.1, 1.3};
  ParamRange rho_cp_range{0.8e6, 2.4e6};
  std::vector<LossRecord> history;

  std::array<double, 4> inputs(double x_norm, double t_norm, const MaterialSample& mat) const {
    return {x_norm, t_norm, k_range.scale(mat.k), rho_cp_range.scale(mat.rho_cp)};
  }
  /// alpha * t_final / L^2 for this scenario.
  double diffusion_number(const MaterialSample& mat) const;
  /// Target for du/dx' at x' = 1.
  double flux_gradient(const MaterialSample& mat) const;
  double initial_value() const { return scenario.t_init / scenario.t_norm; }
};

struct PhysicsPoint {
  double x = 0.0;
  double t = 0.0;
  MaterialSample mat;
};
struct InitialPoint {
  double x = 0.0;
  MaterialSample mat;
};
struct BoundaryPoint {
  double t = 0.0;
  MaterialSample mat;
};

struct CollocationSet {
  std::vector<PhysicsPoint> physics;
  std::vector<InitialPoint> initial;
  std::vector<BoundaryPoint> boundary;
};

struct LossBreakdown {
  double total = 0.0;
  double physics = 0.0;
  double initial = 0.0;
  double boundary = 0.0;
};

/// Uniform collocation points, each carrying its own uniformly drawn material.
CollocationSet sample_collocation(const TrainingConfig& config, std::mt19937_64& rng);

double physics_loss(const SurrogateModel& model, std::span<const PhysicsPoint> points);
double initial_loss(const SurrogateModel& model, std::span<const InitialPoint> points);
double boundary_loss(const SurrogateModel& model, std::span<const BoundaryPoint> points);
LossBreakdown total_loss(const SurrogateModel& model, const CollocationSet& set,
                         const LossWeights& weights);

struct TotalLossGradient {
  LossBreakdown loss;
  std::vector<double> gradient;
};

/// Weighted total loss and its exact gradient in one batched pass.
TotalLossGradient total_loss_gradient(const SurrogateModel& model, const CollocationSet& set,
                                      const LossWeights& weights,
                                      ad::Execution exec = ad::Execution::parallel);

/// Fresh model with seeded Glorot weights.
SurrogateModel initialize(const TrainingConfig& config, const ThermalScenario& scenario);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& msg) : std::runtime_error(msg), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

using EpochObserver = std::function<void(const LossRecord&)>;

/// Full-batch Adam on the weighted total loss. history[i] is the loss at the
/// start of epoch i+1.
SurrogateModel train(const TrainingConfig& config, const ThermalScenario& scenario,
                     const EpochObserver& observer = {});

enum class PredictStatus { ok, extrapolated, out_of_range };

struct PredictOptions {
  double extrapolation_margin = 0.1;  ///< fraction of each range width
  ad::Execution exec = ad::Execution::parallel;
};

struct BackTemperaturePrediction {
  std::vector<double> celsius;  ///< NaN where status is out_of_range
  std::vector<PredictStatus> status;
};

/// u(x'=0, t'=1) for each material in one batched network pass, in deg C.
BackTemperaturePrediction predict_back_temperature(const SurrogateModel& model,
                                                   std::span<const MaterialSample> mats,
                                                   const PredictOptions& options = {});

/// Temperatures (deg C) on a row-major (n_t x n_x) grid of normalized
/// coordinates t' = j/(n_t-1), x' = i/(n_x-1).
std::vector<double> predict_field(const SurrogateModel& model, const MaterialSample& mat,
                                  std::size_t n_t, std::size_t n_x);

class WeightsFormatError : public std::runtime_error {
 public:
  WeightsFormatError(std::string section, const std::string& msg)
      : std::runtime_error(msg), section_(std::move(section)) {}
  /// Name of the section that was missing or malformed.
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

inline constexpr int kWeightsVersion = 1;

std::string to_text(const SurrogateModel& model);
SurrogateModel from_text(std::string_view text);
void save_weights(const SurrogateModel& model, const std::filesystem::path& path);
SurrogateModel load_weights(const std::filesystem::path& path);

}  // namespace tps::pinn
