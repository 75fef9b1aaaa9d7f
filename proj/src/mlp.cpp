#include "tps/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tps::ad {

namespace {

constexpr std::size_t kChannels = 4;  // value, d/dt, d/dx, d2/dx2
constexpr std::size_t kGradBlock = 32;
constexpr std::size_t kForwardBlock = 64;

struct SoftplusDerivs {
  double s0, s1, s2, s3;
};

// max(z,0) + log1p(exp(-|z|)) never overflows; sigma(z) and sigma(-z) are
// both formed from exp(-|z|) so s2 and s3 keep full relative precision in
// the saturated tails.
inline SoftplusDerivs softplus_derivs(double z) {
  const double e = std::exp(-std::abs(z));
  const double big = 1.0 / (1.0 + e);
  const double small = e / (1.0 + e);
  const double sig_pos = z >= 0.0 ? big : small;
  const double sig_neg = z >= 0.0 ? small : big;
  const double s2 = sig_pos * sig_neg;
  return {std::max(z, 0.0) + std::log1p(e), sig_pos, s2, s2 * (sig_neg - sig_pos)};
}

void check_width(const MlpNetwork& net, std::size_t got) {
  if (got != net.input_width()) {
    throw std::invalid_argument("network expects " + std::to_string(net.input_width()) +
                                " inputs, got " + std::to_string(got));
  }
  if (net.output_width() != 1) {
    throw std::invalid_argument("network must have a single output");
  }
}

std::size_t point_count(const MlpNetwork& net, std::span<const double> points) {
  const std::size_t w = net.input_width();
  if (w == 0 || points.size() % w != 0) {
    throw std::invalid_argument("batch size is not a multiple of the input width");
  }
  if (w < 2) throw std::invalid_argument("network needs (x, t, ...) inputs");
  return points.size() / w;
}

// Per-point record of layer inputs and pre-activations for all four
// channels, laid out [layer][channel][unit].
class Tape {
 public:
  explicit Tape(const MlpNetwork& net) {
    const auto& s = net.layer_sizes();
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      a_off_.push_back(a_size_);
      a_size_ += kChannels * s[l];
      z_off_.push_back(z_size_);
      z_size_ += kChannels * s[l + 1];
    }
  }
  std::size_t size() const { return a_size_ + z_size_; }
  double* a(double* base, std::size_t l) const { return base + a_off_[l]; }
  double* z(double* base, std::size_t l) const { return base + a_size_ + z_off_[l]; }
  const double* a(const double* base, std::size_t l) const { return base + a_off_[l]; }
  const double* z(const double* base, std::size_t l) const { return base + a_size_ + z_off_[l]; }

 private:
  std::vector<std::size_t> a_off_, z_off_;
  std::size_t a_size_ = 0, z_size_ = 0;
};

// Forward jet propagation for one input row; fills the tape and returns the
// output jet.
InputDerivatives forward_jet(const MlpNetwork& net, const Tape& tape, const double* input,
                             double* rec) {
  const auto& s = net.layer_sizes();
  const std::size_t n_in = s[0];
  double* a0 = tape.a(rec, 0);
  std::fill(a0, a0 + kChannels * n_in, 0.0);
  std::copy(input, input + n_in, a0);
  a0[n_in + 1] = 1.0;      // d/dt of the t input
  a0[2 * n_in + 0] = 1.0;  // d/dx of the x input

  const std::size_t layers = net.n_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fi = s[l], fo = s[l + 1];
    const double* a = tape.a(rec, l);
    double* z = tape.z(rec, l);
    const auto w = net.weights(l);
    const auto b = net.biases(l);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double* ac = a + c * fi;
      double* zc = z + c * fo;
      for (std::size_t j = 0; j < fo; ++j) {
        const double* wr = w.data() + j * fi;
        double acc = c == 0 ? b[j] : 0.0;
        for (std::size_t i = 0; i < fi; ++i) acc += wr[i] * ac[i];
        zc[j] = acc;
      }
    }
    if (l + 1 < layers) {
      double* next = tape.a(rec, l + 1);
      for (std::size_t j = 0; j < fo; ++j) {
        const double zv = z[j], zt = z[fo + j], zx = z[2 * fo + j], zxx = z[3 * fo + j];
        const auto d = softplus_derivs(zv);
        next[j] = d.s0;
        next[fo + j] = d.s1 * zt;
        next[2 * fo + j] = d.s1 * zx;
        next[3 * fo + j] = d.s2 * zx * zx + d.s1 * zxx;
      }
    }
  }
  const double* zo = tape.z(rec, layers - 1);
  return {zo[0], zo[1], zo[2], zo[3]};
}

// Reverse sweep for one point. `out_adj` is dloss/d(output jet).
void backward_jet(const MlpNetwork& net, const Tape& tape, const double* rec,
                  const InputDerivatives& out_adj, double* grad, std::vector<double>& zbar,
                  std::vector<double>& abar) {
  const auto& s = net.layer_sizes();
  const std::size_t layers = net.n_layers();
  zbar[0] = out_adj.u;
  zbar[1] = out_adj.du_dt;
  zbar[2] = out_adj.du_dx;
  zbar[3] = out_adj.d2u_dx2;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t fi = s[l], fo = s[l + 1];
    const double* a = tape.a(rec, l);
    const auto w = net.weights(l);
    double* gw = grad + net.weight_offset(l);
    double* gb = grad + net.bias_offset(l);
    for (std::size_t j = 0; j < fo; ++j) {
      gb[j] += zbar[j];
      double* gwr = gw + j * fi;
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double zc = zbar[c * fo + j];
        if (zc == 0.0) continue;
        const double* ac = a + c * fi;
        for (std::size_t i = 0; i < fi; ++i) gwr[i] += zc * ac[i];
      }
    }
    if (l == 0) break;
    // a_bar = W^T z_bar per channel
    std::fill(abar.begin(), abar.begin() + static_cast<long>(kChannels * fi), 0.0);
    for (std::size_t j = 0; j < fo; ++j) {
      const double* wr = w.data() + j * fi;
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double zc = zbar[c * fo + j];
        if (zc == 0.0) continue;
        double* ac = abar.data() + c * fi;
        for (std::size_t i = 0; i < fi; ++i) ac[i] += wr[i] * zc;
      }
    }
    // Through the softplus jet of layer l-1 (width fi).
    const double* z = tape.z(rec, l - 1);
    for (std::size_t j = 0; j < fi; ++j) {
      const double zv = z[j], zt = z[fi + j], zx = z[2 * fi + j], zxx = z[3 * fi + j];
      const auto d = softplus_derivs(zv);
      const double av = abar[j], at = abar[fi + j], ax = abar[2 * fi + j], axx = abar[3 * fi + j];
      zbar[j] = av * d.s1 + at * d.s2 * zt + ax * d.s2 * zx + axx * (d.s3 * zx * zx + d.s2 * zxx);
      zbar[fi + j] = at * d.s1;
      zbar[2 * fi + j] = ax * d.s1 + axx * 2.0 * d.s2 * zx;
      zbar[3 * fi + j] = axx * d.s1;
    }
  }
}

bool finite(const InputDerivatives& d) {
  return std::isfinite(d.u) && std::isfinite(d.du_dt) && std::isfinite(d.du_dx) &&
         std::isfinite(d.d2u_dx2);
}

}  // namespace

MlpNetwork::MlpNetwork(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) {
      throw std::invalid_argument("layer sizes must be positive");
    }
    w_offset_.push_back(off);
    off += sizes_[l] * sizes_[l + 1];
    b_offset_.push_back(off);
    off += sizes_[l + 1];
  }
  params_.assign(off, 0.0);
}

MlpNetwork MlpNetwork::glorot_uniform(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  MlpNetwork net(std::move(layer_sizes));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const double fan = static_cast<double>(net.sizes_[l] + net.sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

std::size_t MlpNetwork::max_width() const {
  return *std::max_element(sizes_.begin(), sizes_.end());
}

double softplus(double z) { return softplus_derivs(z).s0; }
double sigmoid(double z) { return softplus_derivs(z).s1; }

double forward(const MlpNetwork& net, std::span<const double> inputs) {
  check_width(net, inputs.size());
  std::vector<double> a(inputs.begin(), inputs.end()), z;
  const auto& s = net.layer_sizes();
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const std::size_t fi = s[l], fo = s[l + 1];
    const auto w = net.weights(l);
    const auto b = net.biases(l);
    z.assign(fo, 0.0);
    for (std::size_t j = 0; j < fo; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < fi; ++i) acc += w[j * fi + i] * a[i];
      z[j] = acc;
    }
    if (l + 1 < net.n_layers()) {
      for (double& v : z) v = softplus(v);
    }
    a.swap(z);
  }
  return a[0];
}

std::vector<double> forward_batch(const MlpNetwork& net, std::span<const double> inputs,
                                  Execution exec) {
  const std::size_t n_in = net.input_width();
  check_width(net, n_in);
  if (inputs.size() % n_in != 0) {
    throw std::invalid_argument("batch size is not a multiple of the input width");
  }
  const std::size_t n = inputs.size() / n_in;
  std::vector<double> out(n);
  const std::size_t n_blocks = (n + kForwardBlock - 1) / kForwardBlock;
  const std::size_t width = net.max_width();
  const auto& s = net.layer_sizes();

  // Activations are stored unit-major within a block so the inner loop runs
  // contiguously over points.
  auto run_block = [&](std::size_t blk, std::vector<double>& act, std::vector<double>& nxt) {
    const std::size_t p0 = blk * kForwardBlock;
    const std::size_t bn = std::min(kForwardBlock, n - p0);
    for (std::size_t p = 0; p < bn; ++p) {
      for (std::size_t i = 0; i < n_in; ++i) act[i * kForwardBlock + p] = inputs[(p0 + p) * n_in + i];
    }
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      const std::size_t fi = s[l], fo = s[l + 1];
      const auto w = net.weights(l);
      const auto b = net.biases(l);
      const bool hidden = l + 1 < net.n_layers();
      for (std::size_t j = 0; j < fo; ++j) {
        double* zr = nxt.data() + j * kForwardBlock;
        std::fill(zr, zr + bn, b[j]);
        for (std::size_t i = 0; i < fi; ++i) {
          const double wji = w[j * fi + i];
          const double* ar = act.data() + i * kForwardBlock;
          for (std::size_t p = 0; p < bn; ++p) zr[p] += wji * ar[p];
        }
        if (hidden) {
          for (std::size_t p = 0; p < bn; ++p) zr[p] = softplus(zr[p]);
        }
      }
      act.swap(nxt);
    }
    for (std::size_t p = 0; p < bn; ++p) out[p0 + p] = act[p];
  };

  if (exec == Execution::serial) {
    std::vector<double> act(width * kForwardBlock), nxt(width * kForwardBlock);
    for (std::size_t blk = 0; blk < n_blocks; ++blk) run_block(blk, act, nxt);
  } else {
#pragma omp parallel
    {
      std::vector<double> act(width * kForwardBlock), nxt(width * kForwardBlock);
#pragma omp for schedule(static)
      for (long blk = 0; blk < static_cast<long>(n_blocks); ++blk) {
        run_block(static_cast<std::size_t>(blk), act, nxt);
      }
    }
  }
  return out;
}

InputDerivatives input_derivatives(const MlpNetwork& net, double x, double t,
                                   std::span<const double> extra) {
  check_width(net, 2 + extra.size());
  std::vector<double> row{x, t};
  row.insert(row.end(), extra.begin(), extra.end());
  const Tape tape(net);
  std::vector<double> rec(tape.size());
  return forward_jet(net, tape, row.data(), rec.data());
}

std::vector<InputDerivatives> batch_input_derivatives(const MlpNetwork& net,
                                                      std::span<const double> points,
                                                      Execution exec) {
  const std::size_t n = point_count(net, points);
  check_width(net, net.input_width());
  const std::size_t n_in = net.input_width();
  const Tape tape(net);
  std::vector<InputDerivatives> out(n);
  if (exec == Execution::serial) {
    std::vector<double> rec(tape.size());
    for (std::size_t p = 0; p < n; ++p) out[p] = forward_jet(net, tape, &points[p * n_in], rec.data());
    return out;
  }
#pragma omp parallel
  {
    std::vector<double> rec(tape.size());
#pragma omp for schedule(static)
    for (long p = 0; p < static_cast<long>(n); ++p) {
      const auto pi = static_cast<std::size_t>(p);
      out[pi] = forward_jet(net, tape, &points[pi * n_in], rec.data());
    }
  }
  return out;
}

LossGradient loss_gradient(const MlpNetwork& net, std::span<const double> points,
                           const LossEvaluator& evaluator, Execution exec) {
  const std::size_t n = point_count(net, points);
  check_width(net, net.input_width());
  const std::size_t n_in = net.input_width();
  const std::size_t n_params = net.parameter_count();
  const Tape tape(net);
  const std::size_t rec_size = tape.size();
  const std::size_t zbar_size = kChannels * net.max_width();

  std::vector<double> records(n * rec_size);
  std::vector<InputDerivatives> outputs(n);
  const auto record = [&](std::size_t p) {
    outputs[p] = forward_jet(net, tape, &points[p * n_in], &records[p * rec_size]);
  };
  if (exec == Execution::serial) {
    for (std::size_t p = 0; p < n; ++p) record(p);
  } else {
#pragma omp parallel for schedule(static)
    for (long p = 0; p < static_cast<long>(n); ++p) record(static_cast<std::size_t>(p));
  }

  std::vector<InputDerivatives> adjoint(n);
  LossGradient result;
  result.loss = evaluator(outputs, adjoint);
  if (!std::isfinite(result.loss)) {
    for (std::size_t p = 0; p < n; ++p) {
      if (!finite(outputs[p]) || !finite(adjoint[p])) {
        throw NonFiniteLoss(p, "non-finite loss at batch point " + std::to_string(p));
      }
    }
    throw NonFiniteLoss(n, "non-finite loss with finite per-point terms");
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (!finite(adjoint[p])) {
      throw NonFiniteLoss(p, "non-finite loss adjoint at batch point " + std::to_string(p));
    }
  }

  result.gradient.assign(n_params, 0.0);
  if (exec == Execution::serial) {
    std::vector<double> zbar(zbar_size), abar(zbar_size);
    for (std::size_t p = 0; p < n; ++p) {
      backward_jet(net, tape, &records[p * rec_size], adjoint[p], result.gradient.data(), zbar, abar);
    }
    return result;
  }

  const std::size_t n_blocks = (n + kGradBlock - 1) / kGradBlock;
  std::vector<double> block_grads(n_blocks * n_params, 0.0);
#pragma omp parallel
  {
    std::vector<double> zbar(zbar_size), abar(zbar_size);
#pragma omp for schedule(static)
    for (long blk = 0; blk < static_cast<long>(n_blocks); ++blk) {
      const auto b = static_cast<std::size_t>(blk);
      double* g = &block_grads[b * n_params];
      const std::size_t end = std::min(n, (b + 1) * kGradBlock);
      for (std::size_t p = b * kGradBlock; p < end; ++p) {
        backward_jet(net, tape, &records[p * rec_size], adjoint[p], g, zbar, abar);
      }
    }
  }
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const double* g = &block_grads[b * n_params];
    for (std::size_t k = 0; k < n_params; ++k) result.gradient[k] += g[k];
  }
  return result;
}

}  // namespace tps::ad
