#pragma once

// Random-walk Metropolis-Hastings on log switching rates, the joint update of
// covariate switching parameters, and the log-adaptive step-size controller.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/random.hpp"

namespace phmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// adaptation

struct MhAdapter {
  double log_step = std::log(0.2);
  double target_accept = 0.44;
  int batch = 50;
  int accept_count = 0;
  int proposals = 0;
  int batches_done = 0;
  bool frozen = false;

  double step() const { return std::exp(log_step); }
};

// Every `batch` proposals the log step moves by sign(rate - target) times
// min(0.5, k^{-1/2}), k being the batch number. Frozen adapters only count.
inline MhAdapter adapt(MhAdapter a, bool accepted, long iteration) {
  if (iteration < 1) throw ConfigError("adapt: iteration must be >= 1");
  a.accept_count += accepted ? 1 : 0;
  ++a.proposals;
  if (a.frozen || a.proposals < a.batch) return a;
  const double rate = static_cast<double>(a.accept_count) / a.proposals;
  ++a.batches_done;
  const double size = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(a.batches_done)));
  const double diff = rate - a.target_accept;
  // integer tallies make an exact hit representable
  const double sign = std::abs(diff) < 1e-12 ? 0.0 : (diff > 0 ? 1.0 : -1.0);
  a.log_step += sign * size;
  a.accept_count = 0;
  a.proposals = 0;
  return a;
}

template <typename T>
struct MhResult {
  T value;
  bool accepted = false;
};

// ---------------------------------------------------------------------------
// penalized switching rates

// Log full conditional of the off-diagonal log rates given the path's
// transition counts, including the Jacobian of the log transform.
inline double log_target_rates(const SwitchRates& rates, const CountMatrix& counts, const PenaltySpec& penalty,
                               double dt) {
  if (!is_valid_ptm_regime(rates, dt)) return kNegInf;
  const int n = rates.num_states();
  double lp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double exit = rates.exit_rate(i);
    const double stay = std::exp(-exit * dt);
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double g = rates.gamma(i, j);
      if (!(g > 0.0) || !std::isfinite(g)) return kNegInf;
      const double p = g * stay;
      off += p;
      if (counts(i, j) > 0) lp += counts(i, j) * std::log(p);
      lp += penalty.log_prior(g) + std::log(g);
    }
    if (off > 1.0) return kNegInf;
    if (counts(i, i) > 0) {
      const double pii = 1.0 - off;
      if (!(pii > 0.0)) return kNegInf;
      lp += counts(i, i) * std::log1p(-off);
    }
  }
  return lp;
}

// Joint normal random walk on all log gamma_ij (i != j).
inline MhResult<SwitchRates> update_rates_mh(const SwitchRates& current, std::span<const std::uint8_t> path,
                                             const PenaltySpec& penalty, const MhAdapter& adapter, Rng& rng,
                                             double dt = 1.0, int steps = 1) {
  const int n = current.num_states();
  const CountMatrix counts = transition_counts({path.begin(), path.end()}, n);
  MhResult<SwitchRates> out{current, false};
  double cur_lp = log_target_rates(out.value, counts, penalty, dt);
  const double step = adapter.step();
  std::normal_distribution<double> z(0.0, 1.0);
  for (int s = 0; s < steps; ++s) {
    SwitchRates prop = out.value;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          const double move = step * z(rng);
          if (move != 0.0) prop.gamma(i, j) = std::exp(std::log(prop.gamma(i, j)) + move);
        }
    const double prop_lp = log_target_rates(prop, counts, penalty, dt);
    const double u = uniform01(rng);
    if (prop_lp != kNegInf && std::log(u) < prop_lp - cur_lp) {
      out.value = std::move(prop);
      cur_lp = prop_lp;
      out.accepted = true;
    } else {
      out.accepted = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// covariate switching parameters

// Packs (mu off-diagonals, beta off-diagonals, alpha) row-major.
inline std::vector<double> pack_covariate(const CovariateParams& p) {
  const int n = p.num_states();
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) v.push_back(p.mu(i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) v.push_back(p.beta(i, j));
  v.push_back(p.alpha);
  return v;
}

inline CovariateParams unpack_covariate(std::span<const double> v, int n) {
  CovariateParams p{Matrix::Zero(n, n), Matrix::Zero(n, n), 0.0};
  std::size_t k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) p.mu(i, j) = v[k++];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) p.beta(i, j) = v[k++];
  p.alpha = v[k];
  return p;
}

inline std::size_t covariate_dimension(int n) { return 2 * static_cast<std::size_t>(n) * (n - 1) + 1; }

// Log prior of the baseline rate x = e^mu given c = c(beta): x c ~ H.Norm(0, tau)
// (ridge) or x c ~ Exp(mean tau) (lasso). Includes log c from the scaled
// density and mu from the log transform.
inline double log_baseline_prior(double mu, double c, const PenaltySpec& penalty) {
  const double x = std::exp(mu);
  switch (penalty.family) {
    case PenaltyFamily::ridge:
      return std::log(c) - c * c * x * x / (2.0 * penalty.tau) + mu;
    case PenaltyFamily::lasso:
      return std::log(c) - c * x / penalty.tau + mu;
    case PenaltyFamily::none:
      break;
  }
  return mu;
}

// Log full conditional of the covariate block given the path.
inline double log_target_covariate(const CovariateParams& params, std::span<const std::uint8_t> path,
                                   std::span<const double> w, const PenaltySpec& penalty, const Hyperparams& hyper,
                                   double dt, std::vector<double>& response) {
  const int n = params.num_states();
  if (!std::isfinite(params.alpha)) return kNegInf;
  response.resize(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) response[t] = covariate_response(w[t], params.alpha);

  double lp = -(params.alpha - hyper.alpha_mean) * (params.alpha - hyper.alpha_mean) / (2.0 * hyper.alpha_var);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double b = params.beta(i, j);
      lp -= (b - hyper.beta_mean) * (b - hyper.beta_mean) / (2.0 * hyper.beta_var);
      double c = 0.0;
      for (double f : response) c += std::exp(b * f);
      c /= static_cast<double>(response.size());
      lp += log_baseline_prior(params.mu(i, j), c, penalty);
    }
  if (!std::isfinite(lp)) return kNegInf;

  const bool check_regime = dt < std::exp(-1.0);
  std::vector<double> rate(n);
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const int from = path[t];
    const int to = path[t + 1];
    const double f = response[t];
    double exit = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == from) continue;
      rate[j] = std::exp(params.mu(from, j) + params.beta(from, j) * f);
      exit += rate[j];
    }
    const double stay = std::exp(-exit * dt);
    if (check_regime && exit * stay > 1.0) return kNegInf;
    if (to != from) {
      lp += std::log(rate[to] * stay);
    } else {
      const double off = exit * stay;
      if (!(off < 1.0)) return kNegInf;
      lp += std::log1p(-off);
    }
  }
  return std::isfinite(lp) ? lp : kNegInf;
}

// Joint normal random walk on (mu, beta, alpha) with per-coordinate base
// scales multiplied by the adapter's step.
inline MhResult<CovariateParams> update_covariate_params_mh(const CovariateParams& current,
                                                            std::span<const std::uint8_t> path,
                                                            std::span<const double> w, const PenaltySpec& penalty,
                                                            const Hyperparams& hyper, const MhAdapter& adapter,
                                                            Rng& rng, double dt = 1.0,
                                                            std::span<const double> scales = {}, int steps = 1) {
  const int n = current.num_states();
  const std::size_t dim = covariate_dimension(n);
  MhResult<CovariateParams> out{current, false};
  if (steps <= 0) return out;
  std::vector<double> response;
  std::vector<double> theta = pack_covariate(current);
  double cur_lp = log_target_covariate(current, path, w, penalty, hyper, dt, response);
  const double step = adapter.step();
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> prop(dim);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < dim; ++k) prop[k] = theta[k] + step * (scales.empty() ? 1.0 : scales[k]) * z(rng);
    const CovariateParams candidate = unpack_covariate(prop, n);
    const double prop_lp = log_target_covariate(candidate, path, w, penalty, hyper, dt, response);
    const double u = uniform01(rng);
    if (prop_lp != kNegInf && std::log(u) < prop_lp - cur_lp) {
      theta = prop;
      out.value = candidate;
      cur_lp = prop_lp;
      out.accepted = true;
    } else {
      out.accepted = false;
    }
  }
  return out;
}

}  // namespace phmm
