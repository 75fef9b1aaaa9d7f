#include "tps/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tps/cli/csv.hpp"
#include "tps/heatsim.hpp"
#include "tps/reliability.hpp"

namespace tps::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using samplers::Matrix;
using samplers::Vector;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class Fn>
double median_time(int repetitions, Fn&& fn) {
  fn();  // warmup
  std::vector<double> t(static_cast<std::size_t>(repetitions));
  for (auto& v : t) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    v = seconds_since(t0);
  }
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

void write_field(const fs::path& path, const heatsim::TemperatureField& f) {
  CsvWriter csv(path, {"x_m", "t_s", "T_C"});
  for (std::size_t r = 0; r < f.n_rows; ++r) {
    for (std::size_t i = 0; i < f.n_x; ++i) csv.row({f.position(i), f.time(r), f.at(r, i)});
  }
  csv.close();
}

// Linear interpolation of a stored field in time.
double sample_in_time(const heatsim::TemperatureField& f, std::size_t i, double t) {
  const double s = std::clamp(t / f.dt, 0.0, static_cast<double>(f.n_rows - 1));
  const auto r0 = std::min(static_cast<std::size_t>(s), f.n_rows - 2);
  const double w = s - static_cast<double>(r0);
  return (1.0 - w) * f.at(r0, i) + w * f.at(r0 + 1, i);
}

pinn::SurrogateModel load_model(const RunConfig& config, const CommandOptions& options) {
  const auto path = weights_path(config, options);
  if (!fs::exists(path)) throw IoError("weights file " + path.string() + " does not exist");
  pinn::SurrogateModel model;
  try {
    model = pinn::load_weights(path);
  } catch (const pinn::WeightsFormatError& e) {
    throw ConfigError(std::string("weights file: ") + e.what());
  }
  check_model(config, model);
  return model;
}

bool in_domain(const pinn::SurrogateModel& model, const heatsim::MaterialSample& m, double margin) {
  const auto inside = [&](double v, const pinn::ParamRange& r) {
    const double pad = margin * r.width();
    return v >= r.min - pad && v <= r.max + pad;
  };
  return inside(m.k, model.k_range) && inside(m.rho_cp, model.rho_cp_range);
}

// Width used to size the initial MH proposal; a normal prior counts as +-2 sd.
double prior_range(const reliability::ParameterPrior& p) {
  if (p.kind == reliability::ParameterPrior::Kind::uniform) return p.b - p.a;
  return 4.0 * p.b;
}

struct LevelSamples {
  Matrix theta;
  std::vector<double> weights;
  std::vector<samplers::StageRecord> stages;  // smc
  std::vector<double> chain_acceptance;       // mcmc
  std::vector<double> rhat;                   // mcmc
  double elapsed = 0.0;
};

LevelSamples run_smc(const RunConfig& config, const SurrogatePosterior& post, std::size_t n,
                     Execution exec) {
  samplers::SmcOptions opt;
  opt.n_particles = n;
  opt.ess_threshold_ratio = config.sampler.ess_threshold_ratio;
  opt.mutation_steps = config.sampler.mutation_steps;
  opt.seed = config.sampler.seed;
  opt.exec = exec;
  const auto t0 = std::chrono::steady_clock::now();
  auto res = samplers::smc_run(post.prior_sampler, post.log_prior, post.log_likelihood, opt);
  LevelSamples out;
  out.elapsed = seconds_since(t0);
  out.theta = std::move(res.ensemble.theta);
  out.weights = std::move(res.ensemble.weights);
  out.stages = std::move(res.stages);
  return out;
}

LevelSamples run_mcmc(const RunConfig& config, const SurrogatePosterior& post) {
  const auto& s = config.sampler;
  const auto log_post = [&](const Vector& th) {
    const double lp = post.log_prior(th);
    if (lp == kNegInf) return kNegInf;
    Matrix one(1, 2);
    one.row(0) = th.transpose();
    return lp + post.log_likelihood(one).at(0);
  };
  Matrix cov0 = Matrix::Zero(2, 2);
  cov0(0, 0) = std::pow(prior_range(config.prior.k) / 20.0, 2);
  cov0(1, 1) = std::pow(prior_range(config.prior.rho_cp) / 20.0, 2);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Matrix> chains;
  LevelSamples out;
  for (int c = 0; c < s.mcmc_chains; ++c) {
    auto rng = samplers::particle_rng(s.seed, 0, static_cast<std::uint64_t>(c), 11);
    Vector init = post.prior_sampler(rng);
    for (int attempt = 0; !std::isfinite(log_post(init)); ++attempt) {
      if (attempt > 1000) throw ConfigError("sampler: no starting point with finite posterior density");
      init = post.prior_sampler(rng);
    }
    auto res = samplers::mh_run(log_post, init, cov0, s.mcmc_steps, s.seed + static_cast<std::uint64_t>(c));
    out.chain_acceptance.push_back(res.acceptance_rate);
    chains.push_back(std::move(res.samples));
  }
  out.elapsed = seconds_since(t0);
  if (chains.size() >= 2) {
    const Vector r = samplers::gelman_rubin(chains);
    out.rhat.assign(r.data(), r.data() + r.size());
  }
  const auto per = static_cast<Eigen::Index>(s.mcmc_steps);
  out.theta.resize(per * static_cast<Eigen::Index>(chains.size()), 2);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out.theta.middleRows(static_cast<Eigen::Index>(c) * per, per) = chains[c];
  }
  const auto n = static_cast<std::size_t>(out.theta.rows());
  out.weights.assign(n, 1.0 / static_cast<double>(n));
  return out;
}

std::vector<heatsim::MaterialSample> to_materials(const Matrix& theta) {
  std::vector<heatsim::MaterialSample> m(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index i = 0; i < theta.rows(); ++i) m[static_cast<std::size_t>(i)] = {theta(i, 0), theta(i, 1)};
  return m;
}

json level_json(const LevelSummary& s) {
  json j = {{"reliability", s.reliability},
            {"mu_target", s.mu_target},
            {"n_samples", s.n_samples},
            {"n_fdm", s.n_fdm},
            {"fdm_fraction", s.fdm_fraction},
            {"pinn_fraction", s.pinn_fraction},
            {"mean_T_back_pinn", s.mean_t_back_pinn},
            {"mean_T_back_fdm", s.mean_t_back_fdm},
            {"std_T_back_pinn", s.std_t_back_pinn},
            {"max_k", s.max_k},
            {"k_violations", s.k_violations},
            {"stages", s.stages},
            {"elapsed_s", s.elapsed_seconds}};
  j["rhat"] = s.rhat.empty() ? json(nullptr) : json(s.rhat);
  return j;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + " is not valid JSON: " + e.what());
  }
}

json table_json(const CsvTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = json::object();
    for (std::size_t c = 0; c < t.header.size(); ++c) row[t.header[c]] = r[c];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

fs::path weights_path(const RunConfig& config, const CommandOptions& options) {
  return options.weights.empty() ? config.output_dir / "weights.txt" : options.weights;
}

std::string level_tag(double reliability) { return format_number(reliability); }

// ------------------------------------------------------------------ solve

double energy_balance_error(const heatsim::ThermalScenario& s, const heatsim::MaterialSample& mat,
                            const heatsim::TemperatureField& field) {
  const std::size_t last = field.n_rows - 1;
  const double stored = mat.rho_cp * s.thickness * (field.mean(last) - s.t_init);
  const double supplied = s.flux * field.time(last);
  if (supplied == 0.0) return std::abs(stored) / (mat.rho_cp * s.thickness * s.t_norm);
  return std::abs(stored - supplied) / std::abs(supplied);
}

SolveSummary cmd_solve(const RunConfig& config) {
  const auto& s = config.scenario;
  const auto& mat = config.validation;
  const auto expl = heatsim::solve_explicit(s, mat);
  const auto impl = heatsim::solve_implicit(s, mat);

  ensure_dir(config.output_dir);
  write_field(config.output_dir / "field_fdm.csv", expl);
  write_field(config.output_dir / "field_fdm_implicit.csv", impl);

  SolveSummary out;
  CsvWriter diff(config.output_dir / "field_diff.csv", {"x_m", "t_s", "dT_C"});
  for (std::size_t r = 0; r < expl.n_rows; ++r) {
    for (std::size_t i = 0; i < expl.n_x; ++i) {
      const double d = expl.at(r, i) - sample_in_time(impl, i, expl.time(r));
      out.max_scheme_difference = std::max(out.max_scheme_difference, std::abs(d));
      diff.row({expl.position(i), expl.time(r), d});
    }
  }
  diff.close();

  out.back_temperature_explicit = heatsim::back_temperature(expl);
  out.back_temperature_implicit = heatsim::back_temperature(impl);
  out.energy_balance_error = energy_balance_error(s, mat, expl);
  const json summary = {{"back_temperature_explicit_C", out.back_temperature_explicit},
                        {"back_temperature_implicit_C", out.back_temperature_implicit},
                        {"energy_balance_error", out.energy_balance_error},
                        {"max_scheme_difference_C", out.max_scheme_difference},
                        {"explicit_rows", expl.n_rows},
                        {"implicit_rows", impl.n_rows}};
  write_text(config.output_dir / "solve_summary.json", summary.dump(2) + "\n");
  return out;
}

// ------------------------------------------------------------------ train

pinn::SurrogateModel cmd_train(const RunConfig& config, const CommandOptions& options) {
  ensure_dir(config.output_dir);
  const auto path = weights_path(config, options);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  auto model = pinn::train(config.training, config.scenario);
  pinn::save_weights(model, path);
  CsvWriter csv(config.output_dir / "loss_history.csv",
                {"epoch", "total", "physics", "initial", "boundary"});
  for (const auto& r : model.history) {
    csv.row({static_cast<double>(r.epoch), r.total, r.physics, r.initial, r.boundary});
  }
  csv.close();
  return model;
}

// --------------------------------------------------------------- validate

FieldComparison compare_fields(const heatsim::TemperatureField& ref, std::span<const double> other) {
  if (other.size() != ref.values.size()) throw std::invalid_argument("compare_fields: grid mismatch");
  FieldComparison c;
  double se = 0.0;
  for (std::size_t r = 0; r < ref.n_rows; ++r) {
    for (std::size_t i = 0; i < ref.n_x; ++i) {
      const double e = std::abs(other[r * ref.n_x + i] - ref.at(r, i));
      se += e * e;
      if (e > c.max_abs_error) {
        c.max_abs_error = e;
        c.x_at_max = ref.position(i);
        c.t_at_max = ref.time(r);
      }
    }
  }
  c.rmse = std::sqrt(se / static_cast<double>(ref.values.size()));
  return c;
}

void check_model(const RunConfig& config, const pinn::SurrogateModel& model) {
  const auto& a = config.scenario;
  const auto& b = model.scenario;
  if (a.flux != b.flux || a.thickness != b.thickness || a.t_final != b.t_final ||
      a.t_init != b.t_init || a.t_norm != b.t_norm) {
    throw ConfigError("weights were trained for a different scenario (flux, thickness, t_final, "
                      "t_init or t_norm differ from the config)");
  }
}

FieldComparison validate_model(const RunConfig& config, const pinn::SurrogateModel& model) {
  check_model(config, model);
  if (!in_domain(model, config.validation, 0.0)) {
    throw ConfigError("validation material lies outside the surrogate's training range");
  }
  auto s = config.scenario;
  s.n_t_save = 99;  // 100 x n_x comparison grid
  const auto fdm = heatsim::solve_explicit(s, config.validation);
  const auto pinn_field = pinn::predict_field(model, config.validation, fdm.n_rows, fdm.n_x);
  return compare_fields(fdm, pinn_field);
}

FieldComparison cmd_validate(const RunConfig& config, const CommandOptions& options) {
  const auto model = load_model(config, options);
  const auto cmp = validate_model(config, model);

  auto s = config.scenario;
  s.n_t_save = 99;
  const auto fdm = heatsim::solve_explicit(s, config.validation);
  const auto p = pinn::predict_field(model, config.validation, fdm.n_rows, fdm.n_x);
  ensure_dir(config.output_dir);
  CsvWriter csv(config.output_dir / "field_error.csv", {"x_m", "t_s", "T_fdm_C", "T_pinn_C", "abs_error_C"});
  for (std::size_t r = 0; r < fdm.n_rows; ++r) {
    for (std::size_t i = 0; i < fdm.n_x; ++i) {
      const double tp = p[r * fdm.n_x + i];
      csv.row({fdm.position(i), fdm.time(r), fdm.at(r, i), tp, std::abs(tp - fdm.at(r, i))});
    }
  }
  csv.close();
  const json j = {{"rmse_C", cmp.rmse},
                  {"max_abs_error_C", cmp.max_abs_error},
                  {"max_error_location", {{"x_m", cmp.x_at_max}, {"t_s", cmp.t_at_max}}},
                  {"grid", {{"n_t", fdm.n_rows}, {"n_x", fdm.n_x}}},
                  {"material", {{"k", config.validation.k}, {"rho_cp", config.validation.rho_cp}}}};
  write_text(config.output_dir / "validation.json", j.dump(2) + "\n");
  return cmp;
}

// ----------------------------------------------------------------- sample

SurrogatePosterior make_posterior(const RunConfig& config, const pinn::SurrogateModel& model,
                                  double reliability, Execution exec) {
  SurrogatePosterior p;
  p.model.target = reliability::make_target(config.target.t_critical, reliability,
                                            config.target.sigma_target);
  p.model.prior = config.prior;
  p.model.sigma_like = config.target.likelihood_width();
  const pinn::PredictOptions popt{.extrapolation_margin = 0.1, .exec = exec};
  p.model.predictor = [&model, popt](std::span<const heatsim::MaterialSample> mats) {
    return pinn::predict_back_temperature(model, mats, popt).celsius;
  };
  const auto prior = config.prior;
  const double margin = popt.extrapolation_margin;
  // Outside the surrogate's reach the posterior is truncated rather than
  // fed extrapolated nonsense.
  p.log_prior = [prior, &model, margin](const Vector& th) {
    const heatsim::MaterialSample m{th[0], th[1]};
    if (!in_domain(model, m, margin)) return kNegInf;
    return reliability::log_prior(prior, m);
  };
  p.log_likelihood = [pm = p.model](const Matrix& theta) {
    const auto mats = to_materials(theta);
    return pm.log_likelihood(mats);
  };
  p.prior_sampler = [prior](std::mt19937_64& rng) {
    const auto m = prior.sample(rng);
    Vector v(2);
    v << m.k, m.rho_cp;
    return v;
  };
  return p;
}

std::vector<LevelSummary> sample_levels(const RunConfig& config, const pinn::SurrogateModel& model) {
  check_model(config, model);
  ensure_dir(config.output_dir);
  const auto& sc = config.sampler;
  std::vector<LevelSummary> out;

  for (double r : config.target.reliabilities) {
    const auto post = make_posterior(config, model, r);
    const auto run = sc.method == "smc" ? run_smc(config, post, sc.n_particles, Execution::parallel)
                                        : run_mcmc(config, post);
    const auto mats = to_materials(run.theta);
    const std::size_t n = mats.size();
    const auto t_pinn = pinn::predict_back_temperature(model, mats).celsius;

    std::vector<std::size_t> picked;
    if (sc.fdm_subsample == 0 || sc.fdm_subsample >= n) {
      picked.resize(n);
      std::iota(picked.begin(), picked.end(), 0);
    } else {
      for (std::size_t j = 0; j < sc.fdm_subsample; ++j) picked.push_back(j * n / sc.fdm_subsample);
    }
    std::vector<heatsim::MaterialSample> sub;
    for (auto i : picked) sub.push_back(mats[i]);
    const auto t_sub = heatsim::back_temperatures(config.scenario, sub);
    std::vector<double> t_fdm(n, std::nan(""));
    for (std::size_t j = 0; j < picked.size(); ++j) t_fdm[picked[j]] = t_sub[j];

    LevelSummary s;
    s.reliability = r;
    s.mu_target = post.model.target.mu_target;
    s.n_samples = n;
    s.n_fdm = picked.size();
    s.elapsed_seconds = run.elapsed;
    s.rhat = run.rhat;
    s.stages = run.stages.empty() ? 0 : run.stages.back().stage;
    const double tc = config.target.t_critical;
    double w_all = 0.0, w_ok_pinn = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = run.weights[i];
      w_all += w;
      w_ok_pinn += t_pinn[i] <= tc ? w : 0.0;
      m1 += w * t_pinn[i];
      m2 += w * t_pinn[i] * t_pinn[i];
      s.max_k = std::max(s.max_k, mats[i].k);
      s.k_violations += mats[i].k > config.prior.k_max ? 1 : 0;
    }
    s.pinn_fraction = w_ok_pinn / w_all;
    s.mean_t_back_pinn = m1 / w_all;
    s.std_t_back_pinn = std::sqrt(std::max(0.0, m2 / w_all - s.mean_t_back_pinn * s.mean_t_back_pinn));
    double w_sub = 0.0, w_ok = 0.0, mf = 0.0;
    for (auto i : picked) {
      const double w = run.weights[i];
      w_sub += w;
      w_ok += t_fdm[i] <= tc ? w : 0.0;
      mf += w * t_fdm[i];
    }
    s.fdm_fraction = w_ok / w_sub;
    s.mean_t_back_fdm = mf / w_sub;

    const auto tag = level_tag(r);
    CsvWriter samples(config.output_dir / ("samples_R" + tag + ".csv"),
                      {"k", "rho_cp", "alpha", "T_back_pinn", "T_back_fdm", "weight"});
    for (std::size_t i = 0; i < n; ++i) {
      samples.row({mats[i].k, mats[i].rho_cp, mats[i].diffusivity(), t_pinn[i], t_fdm[i], run.weights[i]});
    }
    samples.close();
    if (sc.method == "smc") {
      CsvWriter diag(config.output_dir / ("diagnostics_R" + tag + ".csv"),
                     {"stage", "phi", "delta_phi", "ess", "acceptance_rate", "resampled", "elapsed_s"});
      for (const auto& st : run.stages) {
        diag.row({static_cast<double>(st.stage), st.phi, st.delta_phi, st.ess, st.acceptance_rate,
                  st.resampled ? 1.0 : 0.0, st.elapsed_seconds});
      }
      diag.close();
    } else {
      CsvWriter diag(config.output_dir / ("diagnostics_R" + tag + ".csv"),
                     {"chain", "steps", "acceptance_rate", "rhat_k", "rhat_rho_cp"});
      const double nan = std::nan("");
      for (std::size_t c = 0; c < run.chain_acceptance.size(); ++c) {
        diag.row({static_cast<double>(c), static_cast<double>(sc.mcmc_steps), run.chain_acceptance[c],
                  run.rhat.empty() ? nan : run.rhat[0], run.rhat.empty() ? nan : run.rhat[1]});
      }
      diag.close();
    }
    out.push_back(std::move(s));
  }

  json levels = json::array();
  for (const auto& s : out) levels.push_back(level_json(s));
  const json j = {{"schema_version", kReportSchemaVersion},
                  {"method", sc.method},
                  {"t_critical", config.target.t_critical},
                  {"sigma_target", config.target.sigma_target},
                  {"sigma_like", config.target.likelihood_width()},
                  {"k_max", config.prior.k_max},
                  {"levels", std::move(levels)}};
  write_text(config.output_dir / "reliability.json", j.dump(2) + "\n");
  return out;
}

std::vector<LevelSummary> cmd_sample(const RunConfig& config, const CommandOptions& options) {
  return sample_levels(config, load_model(config, options));
}

// -------------------------------------------------------------- benchmark

std::vector<InferenceTiming> time_inference(const RunConfig& config, const pinn::SurrogateModel& model,
                                            std::span<const std::size_t> m_values, int repetitions) {
  std::vector<InferenceTiming> out;
  for (auto m : m_values) {
    const std::vector<heatsim::MaterialSample> mats(m, config.validation);
    InferenceTiming t;
    t.m = m;
    t.fdm_seconds = median_time(repetitions, [&] {
      const auto v = heatsim::back_temperatures_serial(config.scenario, mats);
      if (v.size() != m) throw std::logic_error("fdm batch size");
    });
    t.pinn_seconds = median_time(repetitions, [&] {
      const auto v = pinn::predict_back_temperature(model, mats);
      if (v.celsius.size() != m) throw std::logic_error("surrogate batch size");
    });
    out.push_back(t);
  }
  return out;
}

std::vector<SmcTiming> time_smc(const RunConfig& config, const pinn::SurrogateModel& model,
                                std::span<const int> workers, std::size_t n_particles,
                                int repetitions) {
  const auto post = make_posterior(config, model, config.target.reliabilities.front());
  std::vector<SmcTiming> out;
  for (int w : workers) {
    const int effective = w == 0 ? max_workers() : w;
    set_workers(effective);
    SmcTiming t;
    t.workers = effective;
    t.n_particles = n_particles;
    t.seconds = median_time(repetitions, [&] { run_smc(config, post, n_particles, Execution::parallel); });
    out.push_back(t);
  }
  set_workers(0);
  return out;
}

void cmd_benchmark(const RunConfig& config, const CommandOptions& options) {
  const auto model = load_model(config, options);
  ensure_dir(config.output_dir);
  const auto& b = config.benchmark;
  const auto inf = time_inference(config, model, b.m_values, b.repetitions);
  CsvWriter ci(config.output_dir / "bench_inference.csv", {"M", "fdm_seconds", "pinn_seconds", "speedup"});
  for (const auto& t : inf) {
    ci.row({static_cast<double>(t.m), t.fdm_seconds, t.pinn_seconds, t.fdm_seconds / t.pinn_seconds});
  }
  ci.close();

  const auto smc = time_smc(config, model, b.workers, b.smc_particles, b.repetitions);
  CsvWriter cs(config.output_dir / "bench_smc.csv", {"workers", "n_particles", "seconds", "speedup"});
  const double base = smc.front().seconds;
  for (const auto& t : smc) {
    cs.row({static_cast<double>(t.workers), static_cast<double>(t.n_particles), t.seconds, base / t.seconds});
  }
  cs.close();
}

// ----------------------------------------------------------------- report

std::vector<std::string> report_inputs() {
  return {"field_fdm.csv", "loss_history.csv", "validation.json",
          "reliability.json", "bench_inference.csv", "bench_smc.csv"};
}

json cmd_report(const fs::path& dir) {
  std::vector<std::string> missing;
  for (const auto& f : report_inputs()) {
    if (!fs::is_regular_file(dir / f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    std::string msg = "missing report inputs in " + dir.string() + ":";
    for (const auto& f : missing) msg += " " + f;
    throw IoError(msg);
  }

  const auto field = read_csv(dir / "field_fdm.csv");
  const auto cx = field.column("x_m"), ct = field.column("t_s"), cT = field.column("T_C");
  double t_last = -1.0, back = std::nan("");
  for (const auto& r : field.rows) {
    if (r[cx] == 0.0 && r[ct] >= t_last) {
      t_last = r[ct];
      back = r[cT];
    }
  }

  const auto loss = read_csv(dir / "loss_history.csv");
  const auto ctot = loss.column("total");
  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& r : loss.rows) min_loss = std::min(min_loss, r[ctot]);

  json report = {
      {"schema_version", kReportSchemaVersion},
      {"fdm", {{"rows", field.rows.size()}, {"final_time_s", t_last}, {"back_temperature_C", back}}},
      {"training",
       {{"epochs", loss.rows.size()},
        {"final_total_loss", loss.rows.empty() ? json(nullptr) : json(loss.rows.back()[ctot])},
        {"min_total_loss", loss.rows.empty() ? json(nullptr) : json(min_loss)}}},
      {"validation", read_json(dir / "validation.json")},
      {"reliability", read_json(dir / "reliability.json")},
      {"bench_inference", table_json(read_csv(dir / "bench_inference.csv"))},
      {"bench_smc", table_json(read_csv(dir / "bench_smc.csv"))},
  };
  write_text(dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace tps::cli
