#include "tps/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace tps::cli {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and complains about anything left over.
class Block {
 public:
  Block(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.is_object()) throw ConfigError(name_ + ": expected a JSON object");
    doc_ = &doc;
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_->find(key);
    if (it == doc_->end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = doc_->find(key);
    return it == doc_->end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : doc_->items()) {
      if (!seen_.count(item.key())) throw ConfigError(name_ + ": unknown key '" + item.key() + "'");
    }
  }

  const std::string& name() const { return name_; }

 private:
  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

pinn::ParamRange parse_range(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(name + ": expected [min, max]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

reliability::ParameterPrior parse_prior(const json& j, const std::string& name) {
  Block b(j, name);
  std::string dist = "uniform";
  b.get("dist", dist);
  reliability::ParameterPrior p;
  if (dist == "uniform") {
    double lo = 0.0, hi = 0.0;
    b.get("min", lo);
    b.get("max", hi);
    p = reliability::ParameterPrior::uniform(lo, hi);
  } else if (dist == "normal") {
    double mean = 0.0, sd = 0.0;
    b.get("mean", mean);
    b.get("std", sd);
    p = reliability::ParameterPrior::normal(mean, sd);
  } else {
    throw ConfigError(name + ".dist: expected 'uniform' or 'normal'");
  }
  b.finish();
  return p;
}

json prior_json(const reliability::ParameterPrior& p) {
  if (p.kind == reliability::ParameterPrior::Kind::uniform) {
    return {{"dist", "uniform"}, {"min", p.a}, {"max", p.b}};
  }
  return {{"dist", "normal"}, {"mean", p.a}, {"std", p.b}};
}

template <class Fn>
void wrap(const char* block, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(block) + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  wrap("scenario", [&] { scenario.validate(); });
  wrap("training", [&] { training.validate(); });
  wrap("prior", [&] { prior.validate(); });
  wrap("validation", [&] { validation.validate(); });

  if (target.reliabilities.empty()) throw ConfigError("target.reliabilities: at least one level required");
  for (double r : target.reliabilities) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("target.reliabilities: every level must lie in (0, 1)");
  }
  if (!std::isfinite(target.t_critical)) throw ConfigError("target.t_critical: must be finite");
  if (!(std::isfinite(target.sigma_target) && target.sigma_target > 0.0)) {
    throw ConfigError("target.sigma_target: must be > 0");
  }
  if (!(target.sigma_like >= 0.0 && std::isfinite(target.sigma_like))) {
    throw ConfigError("target.sigma_like: must be >= 0");
  }

  if (sampler.method != "smc" && sampler.method != "mcmc") {
    throw ConfigError("sampler.method: expected 'smc' or 'mcmc'");
  }
  if (sampler.n_particles < 2) throw ConfigError("sampler.n_particles: must be >= 2");
  if (!(sampler.ess_threshold_ratio > 0.0 && sampler.ess_threshold_ratio <= 1.0)) {
    throw ConfigError("sampler.ess_threshold_ratio: must lie in (0, 1]");
  }
  if (sampler.mutation_steps < 0) throw ConfigError("sampler.mutation_steps: must be >= 0");
  if (sampler.mcmc_chains < 1) throw ConfigError("sampler.mcmc_chains: must be >= 1");
  if (sampler.mcmc_steps < 1) throw ConfigError("sampler.mcmc_steps: must be >= 1");

  if (benchmark.m_values.empty()) throw ConfigError("benchmark.m_values: at least one batch size required");
  for (auto m : benchmark.m_values) {
    if (m < 1) throw ConfigError("benchmark.m_values: batch sizes must be >= 1");
  }
  if (benchmark.repetitions < 1) throw ConfigError("benchmark.repetitions: must be >= 1");
  if (benchmark.workers.empty()) throw ConfigError("benchmark.workers: at least one count required");
  for (int w : benchmark.workers) {
    if (w < 0) throw ConfigError("benchmark.workers: counts must be >= 0");
  }
  if (benchmark.smc_particles < 2) throw ConfigError("benchmark.smc_particles: must be >= 2");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Block root(doc, "config");

  if (const json* j = root.child("scenario")) {
    Block b(*j, "scenario");
    auto& s = c.scenario;
    b.get("flux", s.flux);
    b.get("thickness", s.thickness);
    b.get("t_final", s.t_final);
    b.get("t_init", s.t_init);
    b.get("t_norm", s.t_norm);
    b.get("n_x", s.n_x);
    b.get("cfl", s.cfl);
    b.get("n_t_implicit", s.n_t_implicit);
    b.get("n_t_save", s.n_t_save);
    b.finish();
  }

  if (const json* j = root.child("training")) {
    Block b(*j, "training");
    auto& t = c.training;
    b.get("hidden", t.hidden);
    b.get("n_grid", t.n_grid);
    b.get("n_ib", t.n_ib);
    b.get("learning_rate", t.learning_rate);
    b.get("final_learning_rate", t.final_learning_rate);
    b.get("epochs", t.epochs);
    b.get("seed", t.seed);
    b.get("resample_each_epoch", t.resample_each_epoch);
    if (const json* w = b.child("loss_weights")) {
      Block lw(*w, "training.loss_weights");
      lw.get("physics", t.weights.physics);
      lw.get("initial", t.weights.initial);
      lw.get("boundary", t.weights.boundary);
      lw.finish();
    }
    if (const json* r = b.child("k_range")) {
      t.k_range = parse_range(*r, "training.k_range");
    }
    if (const json* r = b.child("rho_cp_range")) {
      t.rho_cp_range = parse_range(*r, "training.rho_cp_range");
    }
    b.finish();
  }

  // The prior defaults to the training box so the surrogate never extrapolates.
  c.prior.k = reliability::ParameterPrior::uniform(c.training.k_range.min, c.training.k_range.max);
  c.prior.rho_cp =
      reliability::ParameterPrior::uniform(c.training.rho_cp_range.min, c.training.rho_cp_range.max);
  if (const json* j = root.child("prior")) {
    Block b(*j, "prior");
    if (const json* p = b.child("k")) c.prior.k = parse_prior(*p, "prior.k");
    if (const json* p = b.child("rho_cp")) c.prior.rho_cp = parse_prior(*p, "prior.rho_cp");
    b.get("k_max", c.prior.k_max);
    b.finish();
  }

  if (const json* j = root.child("target")) {
    Block b(*j, "target");
    b.get("t_critical", c.target.t_critical);
    b.get("reliabilities", c.target.reliabilities);
    b.get("sigma_target", c.target.sigma_target);
    b.get("sigma_like", c.target.sigma_like);
    b.finish();
  }

  if (const json* j = root.child("sampler")) {
    Block b(*j, "sampler");
    auto& s = c.sampler;
    b.get("method", s.method);
    b.get("n_particles", s.n_particles);
    b.get("ess_threshold_ratio", s.ess_threshold_ratio);
    b.get("mutation_steps", s.mutation_steps);
    b.get("mcmc_chains", s.mcmc_chains);
    b.get("mcmc_steps", s.mcmc_steps);
    b.get("seed", s.seed);
    b.get("fdm_subsample", s.fdm_subsample);
    b.finish();
  }

  if (const json* j = root.child("benchmark")) {
    Block b(*j, "benchmark");
    b.get("m_values", c.benchmark.m_values);
    b.get("repetitions", c.benchmark.repetitions);
    b.get("workers", c.benchmark.workers);
    b.get("smc_particles", c.benchmark.smc_particles);
    b.finish();
  }

  if (const json* j = root.child("validation")) {
    Block b(*j, "validation");
    double k = c.validation.k, rho = 1509.0, cp = 1050.0, rho_cp = 0.0;
    b.get("k", k);
    b.get("rho", rho);
    b.get("cp", cp);
    b.get("rho_cp", rho_cp);
    b.finish();
    if (rho_cp != 0.0 && (j->contains("rho") || j->contains("cp"))) {
      throw ConfigError("validation: give either rho_cp or rho and cp, not both");
    }
    c.validation = {k, rho_cp != 0.0 ? rho_cp : rho * cp};
  }

  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;
  root.finish();

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  const auto& t = c.training;
  return {
      {"scenario",
       {{"flux", s.flux}, {"thickness", s.thickness}, {"t_final", s.t_final}, {"t_init", s.t_init},
        {"t_norm", s.t_norm}, {"n_x", s.n_x}, {"cfl", s.cfl}, {"n_t_implicit", s.n_t_implicit},
        {"n_t_save", s.n_t_save}}},
      {"training",
       {{"hidden", t.hidden}, {"n_grid", t.n_grid}, {"n_ib", t.n_ib},
        {"learning_rate", t.learning_rate}, {"final_learning_rate", t.final_learning_rate},
        {"epochs", t.epochs}, {"seed", t.seed}, {"resample_each_epoch", t.resample_each_epoch},
        {"loss_weights",
         {{"physics", t.weights.physics}, {"initial", t.weights.initial}, {"boundary", t.weights.boundary}}},
        {"k_range", {t.k_range.min, t.k_range.max}},
        {"rho_cp_range", {t.rho_cp_range.min, t.rho_cp_range.max}}}},
      {"prior", {{"k", prior_json(c.prior.k)}, {"rho_cp", prior_json(c.prior.rho_cp)}, {"k_max", c.prior.k_max}}},
      {"target",
       {{"t_critical", c.target.t_critical}, {"reliabilities", c.target.reliabilities},
        {"sigma_target", c.target.sigma_target}, {"sigma_like", c.target.sigma_like}}},
      {"sampler",
       {{"method", c.sampler.method}, {"n_particles", c.sampler.n_particles},
        {"ess_threshold_ratio", c.sampler.ess_threshold_ratio},
        {"mutation_steps", c.sampler.mutation_steps}, {"mcmc_chains", c.sampler.mcmc_chains},
        {"mcmc_steps", c.sampler.mcmc_steps}, {"seed", c.sampler.seed},
        {"fdm_subsample", c.sampler.fdm_subsample}}},
      {"benchmark",
       {{"m_values", c.benchmark.m_values}, {"repetitions", c.benchmark.repetitions},
        {"workers", c.benchmark.workers}, {"smc_particles", c.benchmark.smc_particles}}},
      {"validation", {{"k", c.validation.k}, {"rho_cp", c.validation.rho_cp}}},
      {"output_dir", c.output_dir.string()},
  };
}

}  // namespace tps::cli
