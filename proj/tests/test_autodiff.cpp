#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "tps/adam.hpp"
#include "tps/mlp.hpp"

using namespace tps::ad;

namespace {

MlpNetwork random_net(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(2, 6), depth(1, 3), extra(0, 2);
  std::vector<std::size_t> sizes{static_cast<std::size_t>(2 + extra(rng))};
  const int d = depth(rng);
  for (int i = 0; i < d; ++i) sizes.push_back(static_cast<std::size_t>(width(rng)));
  sizes.push_back(1);
  auto net = MlpNetwork::glorot_uniform(sizes, rng());
  // Non-zero biases so every path is exercised.
  std::normal_distribution<double> n(0.0, 0.3);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    for (double& b : net.biases(l)) b = n(rng);
  }
  return net;
}

std::vector<double> random_points(std::mt19937_64& rng, std::size_t width, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.5);
  std::vector<double> p(width * n);
  for (double& v : p) v = u(rng);
  return p;
}

// A loss that mixes all four network outputs nonlinearly.
struct MixedLoss {
  std::vector<std::array<double, 5>> c;

  double operator()(std::span<const InputDerivatives> out, std::span<InputDerivatives> adj) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& k = c[i];
      const double r = k[0] * out[i].u + k[1] * out[i].du_dt + k[2] * out[i].du_dx +
                       k[3] * out[i].d2u_dx2 - k[4];
      loss += r * r + 0.1 * out[i].u * out[i].u * out[i].u;
      const double g = 2.0 * r;
      adj[i].u = g * k[0] + 0.3 * out[i].u * out[i].u;
      adj[i].du_dt = g * k[1];
      adj[i].du_dx = g * k[2];
      adj[i].d2u_dx2 = g * k[3];
    }
    return loss;
  }

  double value(const MlpNetwork& net, std::span<const double> pts) const {
    const auto d = batch_input_derivatives(net, pts, Execution::serial);
    std::vector<InputDerivatives> scratch(d.size());
    return (*this)(d, scratch);
  }
};

MixedLoss random_loss(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  MixedLoss l;
  l.c.resize(n);
  for (auto& k : l.c) {
    for (double& v : k) v = g(rng);
  }
  return l;
}

}  // namespace

TEST_CASE("softplus and sigmoid are stable at extreme arguments") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(softplus(-800.0)));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(sigmoid(0.3) + sigmoid(-0.3) == doctest::Approx(1.0));
}

TEST_CASE("loss gradient matches central differences on random networks") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = random_net(rng);
    const std::size_t n = 7;
    const auto pts = random_points(rng, net.input_width(), n);
    const auto loss = random_loss(rng, n);
    const auto lg = loss_gradient(net, pts, loss, Execution::serial);
    CHECK(lg.loss == doctest::Approx(loss.value(net, pts)).epsilon(1e-12));
    for (std::size_t p = 0; p < net.parameter_count(); ++p) {
      const double h = 1e-5;
      const double keep = net.parameters()[p];
      net.parameters()[p] = keep + h;
      const double up = loss.value(net, pts);
      net.parameters()[p] = keep - h;
      const double down = loss.value(net, pts);
      net.parameters()[p] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(lg.gradient[p] - fd);
      CHECK_MESSAGE(err <= std::max(1e-4 * std::abs(fd), 1e-6),
                    "trial " << trial << " parameter " << p << ": " << lg.gradient[p] << " vs " << fd);
    }
  }
}

TEST_CASE("input derivatives match finite differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = random_net(rng);
    auto pt = random_points(rng, net.input_width(), 1);
    const std::span<const double> extra(pt.data() + 2, pt.size() - 2);
    const auto d = input_derivatives(net, pt[0], pt[1], extra);
    CHECK(d.u == doctest::Approx(forward(net, pt)).epsilon(1e-13));
    const auto f = [&](double x, double t) {
      auto q = pt;
      q[0] = x;
      q[1] = t;
      return forward(net, q);
    };
    // Fourth-order stencils keep truncation error far below the tolerance.
    const double h = 1e-3;
    const auto d1 = [&](auto g) { return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h); };
    const auto d2 = [&](auto g) {
      return (-g(2 * h) + 16 * g(h) - 30 * g(0.0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h);
    };
    const auto along_x = [&](double e) { return f(pt[0] + e, pt[1]); };
    const auto along_t = [&](double e) { return f(pt[0], pt[1] + e); };
    const double dx = d1(along_x);
    const double dt = d1(along_t);
    const double dxx = d2(along_x);
    const auto close = [](double a, double b, double rel) {
      return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-3);
    };
    CHECK_MESSAGE(close(d.du_dx, dx, 1e-5), d.du_dx << " vs " << dx);
    CHECK_MESSAGE(close(d.du_dt, dt, 1e-5), d.du_dt << " vs " << dt);
    CHECK_MESSAGE(close(d.d2u_dx2, dxx, 1e-5), d.d2u_dx2 << " vs " << dxx);
  }
}

TEST_CASE("a linear network has exact closed-form derivatives") {
  MlpNetwork net({3, 1});
  auto w = net.weights(0);
  w[0] = 2.0;   // x
  w[1] = -3.0;  // t
  w[2] = 0.5;
  net.biases(0)[0] = 1.0;
  const double extra[] = {4.0};
  const auto d = input_derivatives(net, 0.25, 2.0, extra);
  CHECK(d.u == doctest::Approx(2.0 * 0.25 - 3.0 * 2.0 + 0.5 * 4.0 + 1.0));
  CHECK(d.du_dx == 2.0);
  CHECK(d.du_dt == -3.0);
  CHECK(d.d2u_dx2 == 0.0);
}

TEST_CASE("batched and single-point evaluation agree") {
  std::mt19937_64 rng(5);
  const auto net = MlpNetwork::glorot_uniform({4, 30, 30, 30, 1}, 11);
  const auto pts = random_points(rng, 4, 257);
  const auto batch = forward_batch(net, pts, Execution::parallel);
  const auto serial = forward_batch(net, pts, Execution::serial);
  const auto derivs = batch_input_derivatives(net, pts);
  for (std::size_t i = 0; i < 257; ++i) {
    const std::span<const double> row(pts.data() + 4 * i, 4);
    CHECK(batch[i] == serial[i]);
    CHECK(batch[i] == doctest::Approx(forward(net, row)).epsilon(1e-13));
    CHECK(derivs[i].u == doctest::Approx(batch[i]).epsilon(1e-13));
  }
}

TEST_CASE("parallel gradient is independent of the worker count") {
  std::mt19937_64 rng(8);
  const auto net = MlpNetwork::glorot_uniform({4, 30, 30, 30, 1}, 12);
  const std::size_t n = 300;
  const auto pts = random_points(rng, 4, n);
  const auto loss = random_loss(rng, n);
  tps::set_workers(1);
  const auto one = loss_gradient(net, pts, loss, Execution::parallel);
  tps::set_workers(4);
  const auto four = loss_gradient(net, pts, loss, Execution::parallel);
  tps::set_workers(0);
  const auto serial = loss_gradient(net, pts, loss, Execution::serial);
  CHECK(one.loss == four.loss);
  for (std::size_t p = 0; p < net.parameter_count(); ++p) {
    CHECK(one.gradient[p] == four.gradient[p]);
    CHECK(one.gradient[p] == doctest::Approx(serial.gradient[p]).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("a non-finite loss names the offending batch point") {
  const auto net = MlpNetwork::glorot_uniform({2, 3, 1}, 1);
  const std::vector<double> pts{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  auto bad = [](std::span<const InputDerivatives> out, std::span<InputDerivatives> adj) {
    for (std::size_t i = 0; i < out.size(); ++i) adj[i].u = i == 2 ? std::nan("") : 1.0;
    return 1.0;
  };
  try {
    (void)loss_gradient(net, pts, bad, Execution::serial);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.index() == 2);
  }
}

TEST_CASE("glorot initialization is seeded and bounded") {
  const auto a = MlpNetwork::glorot_uniform({4, 30, 30, 1}, 42);
  const auto b = MlpNetwork::glorot_uniform({4, 30, 30, 1}, 42);
  const auto c = MlpNetwork::glorot_uniform({4, 30, 30, 1}, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.parameter_count() == (4 * 30 + 30) + (30 * 30 + 30) + (30 + 1));
  const double lim = std::sqrt(6.0 / (4 + 30));
  for (double w : a.weights(0)) CHECK(std::abs(w) <= lim);
  for (double v : a.biases(1)) CHECK(v == 0.0);
}

TEST_CASE("adam takes a learning-rate-sized first step and minimizes a quadratic") {
  tps::Adam adam(2, {.learning_rate = 0.1});
  std::vector<double> x{3.0, -2.0};
  const std::vector<double> g0{6.0, -0.004};
  auto first = x;
  adam.step(first, g0);
  // Bias correction makes the first step exactly lr * sign(g) (up to epsilon).
  CHECK(first[0] == doctest::Approx(2.9).epsilon(1e-6));
  CHECK(first[1] == doctest::Approx(-1.9).epsilon(1e-4));

  tps::Adam opt(2, {.learning_rate = 0.05});
  for (int i = 0; i < 3000; ++i) {
    const std::vector<double> g{2.0 * x[0], 8.0 * x[1]};
    opt.step(x, g);
  }
  CHECK(std::abs(x[0]) < 1e-3);
  CHECK(std::abs(x[1]) < 1e-3);
  CHECK(opt.iterations() == 3000);
}
