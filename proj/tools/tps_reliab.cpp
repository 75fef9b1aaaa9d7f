// tps-reliab: heat-shield reliability pipeline.
//
//   tps-reliab <solve|train|validate|sample|benchmark|report> --config <path>
//              [--weights <path>] [--out <dir>] [--seed <u64>] [--workers <n>]
//
// Exit codes: 0 success, 1 I/O failure, 2 configuration error,
// 3 numerical failure (training divergence, sampler breakdown).

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "tps/cli/commands.hpp"
#include "tps/cli/csv.hpp"
#include "tps/execution.hpp"
#include "tps/mlp.hpp"

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

int run(const std::string& command, const std::string& config_path, const std::string& weights,
        const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed, int workers) {
  using namespace tps::cli;
  if (command == "report") {
    // report only needs the output directory; the config is optional.
    std::filesystem::path dir = out ? *out : "out";
    if (!config_path.empty()) dir = out ? std::filesystem::path(*out) : load_config(config_path).output_dir;
    cmd_report(dir);
    std::printf("wrote %s\n", (dir / "report.json").c_str());
    return kOk;
  }

  if (config_path.empty()) throw ConfigError("--config is required for " + command);
  RunConfig config = load_config(config_path);
  if (out) config.output_dir = *out;
  if (seed) {
    config.training.seed = *seed;
    config.sampler.seed = *seed;
  }
  config.validate();
  tps::set_workers(workers);
  const CommandOptions options{weights};

  if (command == "solve") {
    const auto s = cmd_solve(config);
    std::printf("T_back explicit %.4f C, implicit %.4f C, energy balance error %.3g\n",
                s.back_temperature_explicit, s.back_temperature_implicit, s.energy_balance_error);
  } else if (command == "train") {
    const auto m = cmd_train(config, options);
    std::printf("trained %zu epochs, final loss %.6g, weights in %s\n", m.history.size(),
                m.history.empty() ? 0.0 : m.history.back().total, weights_path(config, options).c_str());
  } else if (command == "validate") {
    const auto c = cmd_validate(config, options);
    std::printf("RMSE %.4f C, max error %.4f C at x=%.4g m, t=%.4g s\n", c.rmse, c.max_abs_error,
                c.x_at_max, c.t_at_max);
  } else if (command == "sample") {
    for (const auto& s : cmd_sample(config, options)) {
      std::printf("R=%s mu=%.3f C: FDM fraction %.4f, mean T_back %.3f C, max k %.4f\n",
                  level_tag(s.reliability).c_str(), s.mu_target, s.fdm_fraction, s.mean_t_back_fdm,
                  s.max_k);
    }
  } else if (command == "benchmark") {
    cmd_benchmark(config, options);
    std::printf("wrote bench_inference.csv and bench_smc.csv in %s\n", config.output_dir.c_str());
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-shield back-temperature reliability pipeline"};
  std::string command, config_path, weights;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  app.add_option("command", command, "solve | train | validate | sample | benchmark | report")
      ->required()
      ->check(CLI::IsMember({"solve", "train", "validate", "sample", "benchmark", "report"}));
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--weights", weights, "surrogate weights file (default <out>/weights.txt)");
  app.add_option("--out", out, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "seed for training and sampling");
  app.add_option("--workers", workers, "OpenMP worker count (0 = all cores)")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return run(command, config_path, weights, out, seed, workers);
  } catch (const tps::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const tps::cli::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const tps::pinn::TrainingDiverged& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const tps::samplers::SamplerError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const tps::ad::NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}
