#include "tps/pinn.hpp"

#include <cmath>

#include "tps/adam.hpp"

namespace tps::pinn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool valid_range(const ParamRange& r) {
  return std::isfinite(r.min) && std::isfinite(r.max) && r.min < r.max;
}

void append(std::vector<double>& rows, const SurrogateModel& m, double x, double t,
            const MaterialSample& mat) {
  const auto in = m.inputs(x, t, mat);
  rows.insert(rows.end(), in.begin(), in.end());
}

double mean_or_zero(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

}  // namespace

void TrainingConfig::validate() const {
  require(!hidden.empty(), "training: at least one hidden layer required");
  for (auto h : hidden) require(h >= 1, "training: hidden widths must be >= 1");
  require(n_grid >= 1, "training: n_grid must be >= 1");
  require(n_ib >= 2, "training: n_ib must be >= 2 (initial and boundary share it)");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "training: learning_rate must be > 0");
  require(final_learning_rate == 0.0 ||
              (std::isfinite(final_learning_rate) && final_learning_rate > 0.0),
          "training: final_learning_rate must be > 0 (or 0 for a fixed rate)");
  require(epochs >= 0, "training: epochs must be >= 0");
  require(weights.physics >= 0.0 && weights.initial >= 0.0 && weights.boundary >= 0.0,
          "training: loss weights must be >= 0");
  require(valid_range(k_range), "training: k_range must satisfy min < max");
  require(valid_range(rho_cp_range), "training: rho_cp_range must satisfy min < max");
  require(k_range.min > 0.0 && rho_cp_range.min > 0.0, "training: parameter ranges must be positive");
}

double SurrogateModel::diffusion_number(const MaterialSample& mat) const {
  return heatsim::diffusion_number(scenario, mat);
}

double SurrogateModel::flux_gradient(const MaterialSample& mat) const {
  return heatsim::normalized_flux_gradient(scenario, mat);
}

CollocationSet sample_collocation(const TrainingConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> k_dist(config.k_range.min, config.k_range.max);
  std::uniform_real_distribution<double> c_dist(config.rho_cp_range.min, config.rho_cp_range.max);
  auto material = [&] {
    const double k = k_dist(rng);
    return MaterialSample{k, c_dist(rng)};
  };
  CollocationSet set;
  for (int i = 0; i < config.n_grid; ++i) {
    const double x = unit(rng);
    const double t = unit(rng);
    set.physics.push_back({x, t, material()});
  }
  for (int i = 0; i < config.n_initial(); ++i) {
    const double x = unit(rng);
    set.initial.push_back({x, material()});
  }
  for (int i = 0; i < config.n_boundary(); ++i) {
    const double t = unit(rng);
    set.boundary.push_back({t, material()});
  }
  return set;
}

double physics_loss(const SurrogateModel& model, std::span<const PhysicsPoint> points) {
  std::vector<double> rows;
  for (const auto& p : points) append(rows, model, p.x, p.t, p.mat);
  const auto d = ad::batch_input_derivatives(model.net, rows, ad::Execution::serial);
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double f = d[i].du_dt - model.diffusion_number(points[i].mat) * d[i].d2u_dx2;
    sum += f * f;
  }
  return mean_or_zero(sum, points.size());
}

double initial_loss(const SurrogateModel& model, std::span<const InitialPoint> points) {
  std::vector<double> rows;
  for (const auto& p : points) append(rows, model, p.x, 0.0, p.mat);
  const auto d = ad::batch_input_derivatives(model.net, rows, ad::Execution::serial);
  double sum = 0.0;
  const double u0 = model.initial_value();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = d[i].u - u0;
    sum += e * e;
  }
  return mean_or_zero(sum, points.size());
}

double boundary_loss(const SurrogateModel& model, std::span<const BoundaryPoint> points) {
  std::vector<double> rows;
  for (const auto& p : points) append(rows, model, 0.0, p.t, p.mat);
  for (const auto& p : points) append(rows, model, 1.0, p.t, p.mat);
  const auto d = ad::batch_input_derivatives(model.net, rows, ad::Execution::serial);
  const std::size_t n = points.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double back = d[i].du_dx;
    const double front = d[n + i].du_dx - model.flux_gradient(points[i].mat);
    sum += back * back + front * front;
  }
  return mean_or_zero(sum, n);
}

LossBreakdown total_loss(const SurrogateModel& model, const CollocationSet& set,
                         const LossWeights& weights) {
  LossBreakdown out;
  out.physics = physics_loss(model, set.physics);
  out.initial = initial_loss(model, set.initial);
  out.boundary = boundary_loss(model, set.boundary);
  out.total = weights.physics * out.physics + weights.initial * out.initial +
              weights.boundary * out.boundary;
  return out;
}

TotalLossGradient total_loss_gradient(const SurrogateModel& model, const CollocationSet& set,
                                      const LossWeights& weights, ad::Execution exec) {
  const std::size_t np = set.physics.size();
  const std::size_t ni = set.initial.size();
  const std::size_t nb = set.boundary.size();

  // Batch layout: [physics | initial | boundary at x'=0 | boundary at x'=1]
  std::vector<double> rows;
  rows.reserve(4 * (np + ni + 2 * nb));
  std::vector<double> diff(np), grad_target(nb);
  for (std::size_t i = 0; i < np; ++i) {
    const auto& p = set.physics[i];
    append(rows, model, p.x, p.t, p.mat);
    diff[i] = model.diffusion_number(p.mat);
  }
  for (const auto& p : set.initial) append(rows, model, p.x, 0.0, p.mat);
  for (const auto& p : set.boundary) append(rows, model, 0.0, p.t, p.mat);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& p = set.boundary[i];
    append(rows, model, 1.0, p.t, p.mat);
    grad_target[i] = model.flux_gradient(p.mat);
  }

  LossBreakdown parts;
  const double u0 = model.initial_value();
  auto evaluator = [&](std::span<const ad::InputDerivatives> out,
                       std::span<ad::InputDerivatives> adj) {
    double sp = 0.0, si = 0.0, sb = 0.0;
    const double cp = np ? weights.physics / static_cast<double>(np) : 0.0;
    const double ci = ni ? weights.initial / static_cast<double>(ni) : 0.0;
    const double cb = nb ? weights.boundary / static_cast<double>(nb) : 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      const double f = out[i].du_dt - diff[i] * out[i].d2u_dx2;
      sp += f * f;
      adj[i].du_dt = 2.0 * cp * f;
      adj[i].d2u_dx2 = -2.0 * cp * f * diff[i];
    }
    for (std::size_t i = 0; i < ni; ++i) {
      const std::size_t j = np + i;
      const double e = out[j].u - u0;
      si += e * e;
      adj[j].u = 2.0 * ci * e;
    }
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t j0 = np + ni + i;
      const std::size_t j1 = np + ni + nb + i;
      const double back = out[j0].du_dx;
      const double front = out[j1].du_dx - grad_target[i];
      sb += back * back + front * front;
      adj[j0].du_dx = 2.0 * cb * back;
      adj[j1].du_dx = 2.0 * cb * front;
    }
    parts.physics = mean_or_zero(sp, np);
    parts.initial = mean_or_zero(si, ni);
    parts.boundary = mean_or_zero(sb, nb);
    parts.total = weights.physics * parts.physics + weights.initial * parts.initial +
                  weights.boundary * parts.boundary;
    return parts.total;
  };
  auto lg = ad::loss_gradient(model.net, rows, evaluator, exec);
  return {parts, std::move(lg.gradient)};
}

SurrogateModel initialize(const TrainingConfig& config, const ThermalScenario& scenario) {
  config.validate();
  scenario.validate();
  std::vector<std::size_t> sizes{4};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  SurrogateModel model;
  model.net = ad::MlpNetwork::glorot_uniform(sizes, config.seed);
  model.scenario = scenario;
  model.k_range = config.k_range;
  model.rho_cp_range = config.rho_cp_range;
  return model;
}

SurrogateModel train(const TrainingConfig& config, const ThermalScenario& scenario,
                     const EpochObserver& observer) {
  SurrogateModel model = initialize(config, scenario);
  if (config.epochs == 0) return model;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  CollocationSet set = sample_collocation(config, rng);
  Adam adam(model.net.parameter_count(), AdamOptions{.learning_rate = config.learning_rate});
  model.history.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.resample_each_epoch && epoch > 1) set = sample_collocation(config, rng);
    if (config.final_learning_rate > 0.0 && config.epochs > 1) {
      const double frac = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
      adam.set_learning_rate(config.learning_rate *
                             std::pow(config.final_learning_rate / config.learning_rate, frac));
    }
    TotalLossGradient lg;
    try {
      lg = total_loss_gradient(model, set, config.weights);
    } catch (const ad::NonFiniteLoss& e) {
      throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " +
                                        e.what());
    }
    if (!std::isfinite(lg.loss.total)) {
      throw TrainingDiverged(epoch, "non-finite loss at epoch " + std::to_string(epoch));
    }
    const LossRecord rec{epoch, lg.loss.total, lg.loss.physics, lg.loss.initial, lg.loss.boundary};
    model.history.push_back(rec);
    if (observer) observer(rec);
    adam.step(model.net.parameters(), lg.gradient);
  }
  return model;
}

BackTemperaturePrediction predict_back_temperature(const SurrogateModel& model,
                                                   std::span<const MaterialSample> mats,
                                                   const PredictOptions& options) {
  BackTemperaturePrediction out;
  out.celsius.resize(mats.size());
  out.status.resize(mats.size());
  const auto classify = [&](double v, const ParamRange& r) {
    if (!std::isfinite(v)) return PredictStatus::out_of_range;
    if (r.contains(v)) return PredictStatus::ok;
    const double m = options.extrapolation_margin * r.width();
    if (v >= r.min - m && v <= r.max + m) return PredictStatus::extrapolated;
    return PredictStatus::out_of_range;
  };

  std::vector<double> rows(4 * mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const auto sk = classify(mats[i].k, model.k_range);
    const auto sc = classify(mats[i].rho_cp, model.rho_cp_range);
    out.status[i] = std::max(sk, sc);
    const auto in = out.status[i] == PredictStatus::out_of_range
                        ? std::array<double, 4>{0.0, 1.0, 0.0, 0.0}
                        : model.inputs(0.0, 1.0, mats[i]);
    std::copy(in.begin(), in.end(), rows.begin() + static_cast<long>(4 * i));
  }
  const auto u = ad::forward_batch(model.net, rows, options.exec);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    out.celsius[i] = out.status[i] == PredictStatus::out_of_range
                         ? std::nan("")
                         : u[i] * model.scenario.t_norm;
  }
  return out;
}

std::vector<double> predict_field(const SurrogateModel& model, const MaterialSample& mat,
                                  std::size_t n_t, std::size_t n_x) {
  if (n_t < 2 || n_x < 2) throw std::invalid_argument("predict_field: grid needs >= 2 points per axis");
  std::vector<double> rows;
  rows.reserve(4 * n_t * n_x);
  for (std::size_t j = 0; j < n_t; ++j) {
    for (std::size_t i = 0; i < n_x; ++i) {
      append(rows, model, static_cast<double>(i) / static_cast<double>(n_x - 1),
             static_cast<double>(j) / static_cast<double>(n_t - 1), mat);
    }
  }
  auto u = ad::forward_batch(model.net, rows);
  for (double& v : u) v *= model.scenario.t_norm;
  return u;
}

}  // namespace tps::pinn
