#pragma once

// Small fully connected network with softplus hidden layers and a linear
// output, plus an exact differentiation engine:
//   * forward-mode propagation of (u, du/dt, du/dx, d2u/dx2) through every
//     layer for the PDE residual terms;
//   * reverse accumulation through that propagation for the gradient of a
//     scalar loss with respect to every weight and bias.
// Input layout is (x, t, extra...): column 0 is space, column 1 is time.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tps/execution.hpp"

namespace tps::ad {

using tps::Execution;

class MlpNetwork {
 public:
  MlpNetwork() = default;
  /// Zero-initialized network. layer_sizes = {inputs, hidden..., outputs}.
  explicit MlpNetwork(std::vector<std::size_t> layer_sizes);

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  static MlpNetwork glorot_uniform(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t n_layers() const { return sizes_.size() - 1; }
  std::size_t input_width() const { return sizes_.front(); }
  std::size_t output_width() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  /// Row-major (fan_out x fan_in) weights of layer l.
  std::span<const double> weights(std::size_t l) const {
    return {params_.data() + w_offset_[l], sizes_[l + 1] * sizes_[l]};
  }
  std::span<double> weights(std::size_t l) {
    return {params_.data() + w_offset_[l], sizes_[l + 1] * sizes_[l]};
  }
  std::span<const double> biases(std::size_t l) const {
    return {params_.data() + b_offset_[l], sizes_[l + 1]};
  }
  std::span<double> biases(std::size_t l) {
    return {params_.data() + b_offset_[l], sizes_[l + 1]};
  }
  std::size_t weight_offset(std::size_t l) const { return w_offset_[l]; }
  std::size_t bias_offset(std::size_t l) const { return b_offset_[l]; }
  std::size_t max_width() const;

  bool operator==(const MlpNetwork&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> w_offset_;
  std::vector<std::size_t> b_offset_;
  std::vector<double> params_;
};

/// Value and input derivatives of the scalar network output.
struct InputDerivatives {
  double u = 0.0;
  double du_dt = 0.0;
  double du_dx = 0.0;
  double d2u_dx2 = 0.0;
};

/// Thrown when a loss or its adjoint stops being finite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t index, const std::string& msg)
      : std::runtime_error(msg), index_(index) {}
  /// Batch index of the first offending point.
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Numerically stable softplus and its first three derivatives.
double softplus(double z);
double sigmoid(double z);

double forward(const MlpNetwork& net, std::span<const double> inputs);

/// Forward pass over a batch stored row-major (n_points x input_width).
/// Evaluated layer by layer across the batch; OpenMP over batch blocks.
std::vector<double> forward_batch(const MlpNetwork& net, std::span<const double> inputs,
                                  Execution exec = Execution::parallel);

InputDerivatives input_derivatives(const MlpNetwork& net, double x, double t,
                                   std::span<const double> extra = {});

/// Point-wise loss callback. Receives the network outputs at every batch
/// point and must return the scalar loss while writing dloss/d(output) for
/// each point into `adjoint`.
using LossEvaluator = std::function<double(std::span<const InputDerivatives> outputs,
                                           std::span<InputDerivatives> adjoint)>;

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  ///< same layout as MlpNetwork::parameters()
};

/// Evaluates all batch points (row-major, n x input_width), hands their
/// outputs to the evaluator, and back-propagates the returned adjoints.
/// Parallel accumulation uses fixed point blocks summed in order, so the
/// result does not depend on the thread count.
LossGradient loss_gradient(const MlpNetwork& net, std::span<const double> points,
                           const LossEvaluator& evaluator,
                           Execution exec = Execution::parallel);

/// Outputs and derivatives at every batch point, without gradients.
std::vector<InputDerivatives> batch_input_derivatives(const MlpNetwork& net,
                                                      std::span<const double> points,
                                                      Execution exec = Execution::parallel);

}  // namespace tps::ad
