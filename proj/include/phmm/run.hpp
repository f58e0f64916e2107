#pragma once

// Orchestration behind the command-line verbs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/forward_backward.hpp"
#include "phmm/io.hpp"
#include "phmm/sampler.hpp"
#include "phmm/selection.hpp"
#include "phmm/simulate.hpp"

namespace phmm {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

inline CountSeries load_data(const RunConfig& c) {
  if (c.events.empty()) throw ConfigError("data.events is required for this mode");
  std::optional<std::filesystem::path> entrances;
  if (!c.entrances.empty()) entrances = c.entrances;
  CountSeries data = ingest_events(c.events, c.T, c.dt, entrances);
  data.validate();
  return data;
}

inline SimulatedSeries simulate_from_config(const RunConfig& c) {
  if (!c.simulate) throw ConfigError("mode simulate needs data.simulate");
  const SimulationConfig& sim = *c.simulate;
  const int n = c.spec.states;
  if (static_cast<int>(sim.lambda_totals.size()) != n) throw ConfigError("data.simulate.lambda needs one rate per state");
  const EmissionParams emission = EmissionParams::from_totals(sim.lambda_totals);
  std::vector<int> entrances;
  if (sim.entrance_rate > 0.0) entrances = simulate_entrances(sim.entrance_rate, sim.T, c.seed, c.dt);

  TransitionKernels kernels;
  if (sim.p) {
    ProbabilityRows P{*sim.p};
    P.validate(1e-9);
    kernels = TransitionKernels(P);
  } else if (sim.gamma) {
    kernels = TransitionKernels(ptm_from_rates(SwitchRates{*sim.gamma}, c.dt));
  } else {
    const auto w = covariate_series(entrances, sim.T, c.dt, c.spec.covariate.initial_offset, c.spec.covariate.transform);
    kernels = TransitionKernels::varying(n, sim.T);
    fill_covariate_kernels(*sim.covariate, covariate_responses(w, sim.covariate->alpha), c.dt, kernels);
  }
  SimulatedSeries s = simulate_series(emission, kernels, c.spec.hyper.pi0, sim.T, c.seed, c.dt);
  s.data.entrance_times = std::move(entrances);
  return s;
}

inline void write_manifest(const RunConfig& c, const std::filesystem::path& dir, double wall_seconds,
                           const json& extra = json::object()) {
  json m;
  m["version"] = kVersion;
  m["mode"] = to_string(c.mode);
  m["seed"] = c.seed;
  m["config"] = config_to_json(c);
  m["wall_seconds"] = wall_seconds;
  m["compiler"] = __VERSION__;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_file_atomic(dir / "run_manifest.json", m.dump(2) + "\n");
}

// Executes the configured mode and writes every output into c.out_dir.
inline void execute(const RunConfig& c, std::ostream& log = std::cerr) {
  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir(c.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json extra = json::object();

  switch (c.mode) {
    case RunMode::simulate: {
      const SimulatedSeries s = simulate_from_config(c);
      write_file_atomic(dir / "events.csv", events_csv(s.data));
      if (!s.data.entrance_times.empty()) write_file_atomic(dir / "entrances.csv", entrances_csv(s.data));
      std::string path_csv = "t,state\n";
      for (std::size_t t = 0; t < s.path.size(); ++t) path_csv += std::to_string(t + 1) + "," + std::to_string(s.path[t] + 1) + "\n";
      write_file_atomic(dir / "true_path.csv", path_csv);
      std::size_t events = 0;
      for (int x : s.data.counts) events += static_cast<std::size_t>(x);
      json truth = {{"T", s.data.size()},
                    {"events", events},
                    {"entrances", s.data.entrance_times.size()},
                    {"switches", count_switches(s.path)}};
      write_file_atomic(dir / "truth.json", truth.dump(2) + "\n");
      log << "simulated " << s.data.size() << " bins, " << events << " events, " << count_switches(s.path)
          << " switches\n";
      break;
    }
    case RunMode::fit: {
      const CountSeries data = load_data(c);
      const PosteriorSample sample = run_chains(c.spec, data, c.mcmc, c.seed, c.chains, c.threads);
      emit_outputs(sample, data, dir);
      extra["draws"] = sample.draws.size();
      log << "fit: " << sample.draws.size() << " draws, mean switches " << sample.mean_switches << "\n";
      break;
    }
    case RunMode::sweep: {
      const CountSeries data = load_data(c);
      std::vector<double> grid;
      for (double lt : c.grid_log_tau) grid.push_back(std::exp(lt));
      const auto rows = tau_sweep(c.spec, data, c.mcmc, grid, c.chains, c.seed, c.threads);
      write_file_atomic(dir / "sweep.csv", sweep_csv(rows));
      for (const auto& r : rows)
        log << "log_tau " << r.log_tau() << "  mspe " << r.mspe << "  switches " << r.mean_switches
            << (r.argmin ? "  <- argmin" : "") << (r.error.empty() ? "" : "  error: " + r.error) << "\n";
      break;
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(c, dir, wall, extra);
}

// Small exactness checks that need no data: forward filter and FFBS against
// path enumeration, and stationary distributions of known kernels.
inline bool oracle_check(std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    ok = ok && pass;
  };
  Rng rng = make_rng(seed, 0x0c);
  double worst_ll = 0.0, worst_marg = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t T = 3 + inst % 4 * 3;
    Matrix P(2, 2);
    const double a = 0.05 + 0.9 * uniform01(rng), b = 0.05 + 0.9 * uniform01(rng);
    P << 1 - a, a, b, 1 - b;
    const EmissionParams e = EmissionParams::from_totals({0.2 + uniform01(rng), 1.5 + 2 * uniform01(rng)});
    std::vector<int> counts(T);
    for (auto& x : counts) x = std::poisson_distribution<int>(1.0)(rng);
    const Vector pi0 = Vector::Constant(2, 0.5);
    const TransitionKernels k{ProbabilityRows{P}};
    const auto exact = enumerate_path_posterior(counts, e, k, pi0);
    const auto f = forward_filter(counts, e, k, pi0);
    worst_ll = std::max(worst_ll, std::abs(f.log_likelihood() - exact.log_evidence));
    const int draws = 20000;
    Matrix freq = Matrix::Zero(static_cast<Eigen::Index>(T), 2);
    for (int d = 0; d < draws; ++d) {
      const auto path = backward_sample(f, k, rng);
      for (std::size_t t = 0; t < T; ++t) freq(static_cast<Eigen::Index>(t), path[t]) += 1.0 / draws;
    }
    for (std::size_t t = 0; t < T; ++t) {
      const double p = exact.marginals(static_cast<Eigen::Index>(t), 1);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / draws);
      worst_marg = std::max(worst_marg, std::abs(freq(static_cast<Eigen::Index>(t), 1) - p) / se);
    }
  }
  report("forward log-evidence vs enumeration", worst_ll < 1e-8, "max abs diff " + format_number(worst_ll));
  report("FFBS marginals vs enumeration", worst_marg < 4.5, "max |z| " + format_number(worst_marg));

  Matrix P(2, 2);
  P << 0.9986, 0.0014, 0.0042, 0.9958;
  const Vector d = stationary_distribution(ProbabilityRows{P});
  report("stationary distribution", std::abs(d[0] - 0.75) < 0.01 && std::abs(d[1] - 0.25) < 0.01,
         "delta = (" + format_number(d[0]) + ", " + format_number(d[1]) + ")");
  SwitchRates r = SwitchRates::uniform(3, 0.0);
  r.gamma(0, 1) = 5.0;
  r.gamma(0, 2) = 5.0;
  report("validity regime", is_valid_ptm_regime(r, 1.0) && !is_valid_ptm_regime(SwitchRates::uniform(2, 10.0), 0.1),
         "dt = 1 always valid; dt = 0.1, rate 10 rejected");
  return ok;
}

}  // namespace phmm
