#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tps {

struct AdamOptions {
  double learning_rate = 0.006;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n_params, AdamOptions options);

  void step(std::span<double> params, std::span<const double> grad);
  long iterations() const { return t_; }
  const AdamOptions& options() const { return opt_; }
  /// For schedules; moment estimates are kept.
  void set_learning_rate(double lr);

 private:
  AdamOptions opt_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace tps
