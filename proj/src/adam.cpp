#include "tps/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tps {

Adam::Adam(std::size_t n_params, AdamOptions options)
    : opt_(options), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (!(opt_.learning_rate > 0.0)) throw std::invalid_argument("adam: learning_rate must be > 0");
  if (!(opt_.beta1 >= 0.0 && opt_.beta1 < 1.0 && opt_.beta2 >= 0.0 && opt_.beta2 < 1.0)) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
}

void Adam::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: learning_rate must be > 0");
  opt_.learning_rate = lr;
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * grad[i];
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= opt_.learning_rate * m_hat / (std::sqrt(v_hat) + opt_.epsilon);
  }
}

}  // namespace tps
