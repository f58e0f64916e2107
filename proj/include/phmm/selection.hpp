#pragma once

// One-step-ahead posterior predictive error and the tuning-parameter sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "phmm/posterior.hpp"
#include "phmm/sampler.hpp"

namespace phmm {

// Precomputed per-draw view used to evaluate predictive means quickly.
class OneStepPredictor {
 public:
  OneStepPredictor(const ParamState& draw, double dt, std::span<const double> w)
      : draw_(draw), dt_(dt), w_(w), totals_(draw.emission.totals() * dt) {
    if (const auto* cov = std::get_if<CovariateParams>(&draw.transitions)) {
      cov_ = cov;
    } else {
      constant_ = summary_kernel(draw, dt, w).p;
    }
  }

  // Expected count at t+1 given the draw's state at t (0-based t).
  double operator()(std::size_t t) const {
    const int n = static_cast<int>(totals_.size());
    const int from = draw_.path[t];
    if (!cov_) {
      double m = 0.0;
      for (int k = 0; k < n; ++k) m += totals_[k] * constant_(from, k);
      return m;
    }
    const double f = covariate_response(w_[t], cov_->alpha);
    double exit = 0.0, m = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == from) continue;
      const double g = std::exp(cov_->mu(from, k) + cov_->beta(from, k) * f);
      exit += g;
      m += totals_[k] * g;
    }
    const double stay = std::exp(-exit * dt_);
    return m * stay + totals_[from] * (1.0 - exit * stay);
  }

 private:
  const ParamState& draw_;
  double dt_;
  std::span<const double> w_;
  Vector totals_;
  const CovariateParams* cov_ = nullptr;
  Matrix constant_;
};

// N-hat_{t+1} = sum_k lambda_k P_t[X_t, k] for the draw's own path (0-based t).
inline double one_step_mean(const ParamState& draw, std::size_t t, double dt = 1.0, std::span<const double> w = {}) {
  if (t + 1 >= draw.path.size()) throw ConfigError("one_step_mean: t must be below T - 1");
  return OneStepPredictor(draw, dt, w)(t);
}

struct MspeResult {
  double squared = 0.0;  // mean squared one-step error, averaged over draws and t
  double signed_error = 0.0;  // same without the square
};

inline MspeResult mspe_detail(const PosteriorSample& sample, const CountSeries& data) {
  if (sample.draws.empty()) throw Error("mspe: empty posterior sample");
  const std::size_t T = data.size();
  if (T < 2) throw DataError("mspe needs T >= 2");
  MspeResult r;
  for (const auto& d : sample.draws) {
    if (d.path.size() != T) throw DataError("mspe: draw path length differs from data");
    const OneStepPredictor predict(d, sample.dt, sample.covariate);
    double sq = 0.0, sg = 0.0;
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double e = predict(t) - data.counts[t + 1];
      sq += e * e;
      sg += e;
    }
    r.squared += sq / static_cast<double>(T - 1);
    r.signed_error += sg / static_cast<double>(T - 1);
  }
  r.squared /= static_cast<double>(sample.draws.size());
  r.signed_error /= static_cast<double>(sample.draws.size());
  return r;
}

inline double mspe(const PosteriorSample& sample, const CountSeries& data) { return mspe_detail(sample, data).squared; }

struct SweepRow {
  double tau = 0.0;
  double mspe = NAN;
  double mspe_signed = NAN;
  double mean_switches = NAN;
  double accept_rate = NAN;
  bool argmin = false;
  std::string error;  // empty on success

  double log_tau() const { return std::log(tau); }
};

// Fits one model per tau, all with the same seed schedule, and flags the
// MSPE minimizer. A failing grid point is reported and the sweep continues.
inline std::vector<SweepRow> tau_sweep(const ModelSpec& spec, const CountSeries& data, const McmcSettings& mcmc,
                                       std::vector<double> tau_grid, int chains, std::uint64_t seed,
                                       int threads = 1) {
  if (tau_grid.empty()) throw ConfigError("tau grid is empty");
  for (double t : tau_grid)
    if (!(t > 0.0)) throw ConfigError("tau grid values must be positive");
  std::sort(tau_grid.begin(), tau_grid.end());
  std::vector<SweepRow> rows(tau_grid.size());

  std::mutex m;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(m);
        if (next >= rows.size()) return;
        i = next++;
      }
      SweepRow& row = rows[i];
      row.tau = tau_grid[i];
      try {
        ModelSpec s = spec;
        s.penalty.tau = row.tau;
        const PosteriorSample sample = run_chains(s, data, mcmc, seed, chains, 1);
        const MspeResult e = mspe_detail(sample, data);
        row.mspe = e.squared;
        row.mspe_signed = e.signed_error;
        row.mean_switches = sample.mean_switches;
        row.accept_rate = sample.accept_rate;
      } catch (const std::exception& ex) {
        row.error = ex.what();
      }
    }
  };
  const int nthreads = std::clamp<int>(threads, 1, static_cast<int>(rows.size()));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::size_t best = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].error.empty() && std::isfinite(rows[i].mspe) && (best == rows.size() || rows[i].mspe < rows[best].mspe))
      best = i;
  if (best < rows.size()) rows[best].argmin = true;
  return rows;
}

}  // namespace phmm
