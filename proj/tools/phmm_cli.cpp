// Command-line front end: fit, sweep, simulate, oracle-check.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "phmm/phmm.hpp"

namespace {

int run_verb(phmm::RunMode mode, const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<int> threads, const std::string& out) {
  phmm::RunConfig c = phmm::load_config(config_path);
  c.mode = mode;
  if (seed) c.seed = *seed;
  if (threads) c.threads = *threads;
  if (!out.empty()) c.out_dir = out;
  if (c.threads < 1) throw phmm::ConfigError("--threads must be >= 1");
  if (mode != phmm::RunMode::simulate) c.mcmc.validate();
  phmm::execute(c);
  return phmm::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian penalized Poisson hidden Markov models for event-count series"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override mcmc.seed");
    sub->add_option("--threads", threads, "worker threads (chains / sweep points)");
    sub->add_option("--out", out, "override output.dir");
  };
  auto* fit = app.add_subcommand("fit", "fit one model and write posterior summaries");
  auto* sweep = app.add_subcommand("sweep", "fit over a tau grid and tabulate MSPE");
  auto* simulate = app.add_subcommand("simulate", "write a synthetic event file");
  auto* oracle = app.add_subcommand("oracle-check", "verify the filter and sampler against brute force");
  add_common(fit, true);
  add_common(sweep, true);
  add_common(simulate, true);
  add_common(oracle, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : phmm::kExitConfig;
  }

  try {
    if (*fit) return run_verb(phmm::RunMode::fit, config_path, seed, threads, out);
    if (*sweep) return run_verb(phmm::RunMode::sweep, config_path, seed, threads, out);
    if (*simulate) return run_verb(phmm::RunMode::simulate, config_path, seed, threads, out);
    if (*oracle) {
      std::uint64_t s = seed.value_or(1);
      if (!config_path.empty()) s = seed.value_or(phmm::load_config(config_path).seed);
      return phmm::oracle_check(s, std::cout) ? phmm::kExitOk : phmm::kExitNumerical;
    }
  } catch (const phmm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return phmm::kExitConfig;
  } catch (const phmm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return phmm::kExitData;
  } catch (const phmm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return phmm::kExitData;
  } catch (const phmm::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return phmm::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return phmm::kExitNumerical;
  }
  return phmm::kExitOk;
}
