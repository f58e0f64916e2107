#pragma once

// Poisson emissions with additive per-state increments, the data-augmentation
// split of each count into per-increment components, and the conjugate Gamma
// updates that split makes available.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "phmm/core.hpp"
#include "phmm/random.hpp"

namespace phmm {

inline constexpr double kRateFloor = 1e-300;

inline double log_poisson_pmf(int count, double mean) {
  const double m = std::max(mean, kRateFloor);
  return count * std::log(m) - m - std::lgamma(count + 1.0);
}

// log P(N = count | X = state). `exposure` is the bin width in seconds.
inline double log_emission(int count, int state, const EmissionParams& emission, double exposure = 1.0) {
  return log_poisson_pmf(count, emission.total_rate(state) * exposure);
}

// Multinomial split of `count` over the state+1 active components with
// probabilities proportional to (lambda_base, incr_1, ..., incr_state).
// Components above `state` are left at zero.
inline void split_counts_into(int count, int state, const EmissionParams& emission, Rng& rng, std::span<int> out) {
  std::fill(out.begin(), out.end(), 0);
  if (state == 0 || count == 0) {
    out[0] = count;
    return;
  }
  double remaining_mass = emission.total_rate(state);
  int remaining = count;
  for (int k = 0; k < state && remaining > 0; ++k) {
    const double w = k == 0 ? emission.lambda_base : emission.lambda_incr[k - 1];
    const double p = remaining_mass > 0.0 ? std::clamp(w / remaining_mass, 0.0, 1.0) : 0.0;
    const int x = std::binomial_distribution<int>(remaining, p)(rng);
    out[k] = x;
    remaining -= x;
    remaining_mass -= w;
  }
  out[state] += remaining;
}

inline std::vector<int> split_counts(int count, int state, const EmissionParams& emission, Rng& rng) {
  std::vector<int> out(emission.num_states(), 0);
  split_counts_into(count, state, emission, rng, out);
  return out;
}

// Conjugate sufficient statistics per component: summed split counts and the
// exposure (seconds) during which that component was active.
struct EmissionStats {
  std::vector<double> events;
  std::vector<double> exposure;
};

inline EmissionStats emission_stats(const CountMatrix& augmented, std::span<const std::uint8_t> path, int n,
                                    double dt = 1.0) {
  EmissionStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  std::vector<std::size_t> active(n, 0);
  for (std::size_t t = 0; t < path.size(); ++t) {
    const int x = path[t];
    for (int k = 0; k <= x; ++k) {
      s.events[k] += augmented(k, static_cast<Eigen::Index>(t));
      ++active[k];
    }
  }
  for (int k = 0; k < n; ++k) s.exposure[k] = static_cast<double>(active[k]) * dt;
  return s;
}

// Gibbs draw:
//   lambda_base ~ Gamma(a + sum_t N_1t, b + T dt)
//   incr_k      ~ Gamma(shape_k + sum_{X_t >= k} N_kt, rate_k + dt #{X_t >= k})
inline EmissionParams update_emission_rates(const CountMatrix& augmented, std::span<const std::uint8_t> path,
                                            const Hyperparams& hyper, Rng& rng, double dt = 1.0) {
  const int n = static_cast<int>(hyper.incr_shape.size()) + 1;
  const EmissionStats s = emission_stats(augmented, path, n, dt);
  EmissionParams e;
  e.lambda_base = draw_gamma(rng, hyper.a + s.events[0], hyper.b + s.exposure[0]);
  e.lambda_incr.resize(n - 1);
  for (int k = 1; k < n; ++k)
    e.lambda_incr[k - 1] = draw_gamma(rng, hyper.incr_shape[k - 1] + s.events[k], hyper.incr_rate[k - 1] + s.exposure[k]);
  e.lambda_base = std::max(e.lambda_base, kRateFloor);
  return e;
}

}  // namespace phmm
