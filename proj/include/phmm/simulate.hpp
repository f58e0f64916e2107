#pragma once

// Synthetic data and brute-force reference computations.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/emission.hpp"
#include "phmm/random.hpp"

namespace phmm {

struct SimulatedSeries {
  CountSeries data;
  std::vector<std::uint8_t> path;
};

// X_1 ~ pi0, X_{t+1} ~ P_t[X_t, .], N_t ~ Pois(lambda_{X_t} dt).
inline SimulatedSeries simulate_series(const EmissionParams& emission, const TransitionKernels& kernels,
                                       const Vector& pi0, std::size_t T, std::uint64_t seed, double dt = 1.0) {
  if (T < 1) throw ConfigError("simulate: T must be >= 1");
  const int n = kernels.num_states();
  if (emission.num_states() != n || pi0.size() != n) throw ConfigError("simulate: state count mismatch");
  if (!kernels.is_constant() && kernels.steps() + 1 < T) throw ConfigError("simulate: too few kernels for T");
  Rng rng = make_rng(seed, 0x51u);
  SimulatedSeries out;
  out.data.dt = dt;
  out.data.counts.resize(T);
  out.path.resize(T);
  std::vector<double> w(pi0.data(), pi0.data() + n);
  int x = draw_categorical(rng, w);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      const double* P = kernels.block(t - 1);
      x = draw_categorical(rng, std::span<const double>(P + x * n, n));
    }
    out.path[t] = static_cast<std::uint8_t>(x);
    out.data.counts[t] = std::poisson_distribution<int>(emission.total_rate(x) * dt)(rng);
  }
  return out;
}

// Homogeneous Poisson process of entrances with the given rate per second,
// as strictly increasing 1-based bins.
inline std::vector<int> simulate_entrances(double rate, std::size_t T, std::uint64_t seed, double dt = 1.0) {
  Rng rng = make_rng(seed, 0xe7u);
  std::vector<int> out;
  if (!(rate > 0.0)) return out;
  std::exponential_distribution<double> gap(rate);
  double s = 0.0;
  for (;;) {
    s += gap(rng);
    const auto bin = static_cast<long>(std::ceil(s / dt));
    if (bin > static_cast<long>(T)) break;
    const int b = static_cast<int>(std::max<long>(bin, 1));
    if (out.empty() || out.back() < b) out.push_back(b);
  }
  return out;
}

struct PathPosterior {
  Matrix marginals;  // T x n
  double log_evidence = 0.0;
};

inline constexpr double kEnumerationCap = 5e6;

// Sums the joint density over all n^T paths.
inline PathPosterior enumerate_path_posterior(std::span<const int> counts, const EmissionParams& emission,
                                              const TransitionKernels& kernels, const Vector& pi0, double dt = 1.0) {
  const int n = kernels.num_states();
  const std::size_t T = counts.size();
  if (std::pow(static_cast<double>(n), static_cast<double>(T)) > kEnumerationCap)
    throw TooLarge("enumeration over n^T paths exceeds cap");
  Matrix le(static_cast<Eigen::Index>(T), n);
  for (std::size_t t = 0; t < T; ++t)
    for (int k = 0; k < n; ++k) le(static_cast<Eigen::Index>(t), k) = log_emission(counts[t], k, emission, dt);

  std::vector<double> logp;
  std::vector<std::vector<int>> paths;
  std::vector<int> x(T, 0);
  double m = -INFINITY;
  for (;;) {
    double lp = std::log(pi0[x[0]]) + le(0, x[0]);
    for (std::size_t t = 1; t < T; ++t) lp += std::log(kernels(t - 1, x[t - 1], x[t])) + le(static_cast<Eigen::Index>(t), x[t]);
    logp.push_back(lp);
    paths.push_back(x);
    m = std::max(m, lp);
    std::size_t pos = 0;
    while (pos < T && ++x[pos] == n) x[pos++] = 0;
    if (pos == T) break;
  }
  PathPosterior out;
  out.marginals = Matrix::Zero(static_cast<Eigen::Index>(T), n);
  double total = 0.0;
  for (std::size_t p = 0; p < logp.size(); ++p) {
    const double w = std::exp(logp[p] - m);
    total += w;
    for (std::size_t t = 0; t < T; ++t) out.marginals(static_cast<Eigen::Index>(t), paths[p][t]) += w;
  }
  out.marginals /= total;
  out.log_evidence = m + std::log(total);
  return out;
}

struct GridSpec {
  double lower = 0.0;
  double upper = 1.0;
  std::size_t points = 10001;
  // Skip the boundary-mass check at an end that is a hard support bound.
  bool lower_is_bound = false;
  bool upper_is_bound = false;
};

struct GridDensity {
  std::vector<double> x;
  std::vector<double> density;  // trapezoid-normalized

  double mean() const { return moment([](double v) { return v; }); }

  double variance() const {
    const double mu = mean();
    return moment([mu](double v) { return (v - mu) * (v - mu); });
  }

  // Piecewise-linear-density CDF at v.
  double cdf(double v) const {
    if (v <= x.front()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      const double h = x[i] - x[i - 1];
      if (v >= x[i]) {
        acc += 0.5 * h * (density[i - 1] + density[i]);
        continue;
      }
      const double u = v - x[i - 1];
      const double slope = (density[i] - density[i - 1]) / h;
      return acc + density[i - 1] * u + 0.5 * slope * u * u;
    }
    return 1.0;
  }

 private:
  template <typename F>
  double moment(F g) const {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
      s += 0.5 * (x[i] - x[i - 1]) * (g(x[i - 1]) * density[i - 1] + g(x[i]) * density[i]);
    return s;
  }
};

inline GridDensity grid_posterior_1d(const std::function<double(double)>& log_target, const GridSpec& spec) {
  if (spec.points < 3 || !(spec.upper > spec.lower)) throw ConfigError("grid needs >= 3 points on a proper interval");
  GridDensity g;
  g.x.resize(spec.points);
  g.density.resize(spec.points);
  double m = -INFINITY;
  for (std::size_t i = 0; i < spec.points; ++i) {
    g.x[i] = spec.lower + (spec.upper - spec.lower) * static_cast<double>(i) / static_cast<double>(spec.points - 1);
    g.density[i] = log_target(g.x[i]);
    if (std::isfinite(g.density[i])) m = std::max(m, g.density[i]);
  }
  if (!std::isfinite(m)) throw SupportNotCovered("target is -inf everywhere on the grid");
  for (double& d : g.density) d = std::isfinite(d) ? std::exp(d - m) : 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < spec.points; ++i) total += 0.5 * (g.x[i] - g.x[i - 1]) * (g.density[i - 1] + g.density[i]);
  for (double& d : g.density) d /= total;
  const double h = g.x[1] - g.x[0];
  const std::size_t last = spec.points - 1;
  const double lower_mass = 0.5 * h * (g.density[0] + g.density[1]);
  const double upper_mass = 0.5 * h * (g.density[last - 1] + g.density[last]);
  if ((!spec.lower_is_bound && lower_mass >= 1e-6) || (!spec.upper_is_bound && upper_mass >= 1e-6))
    throw SupportNotCovered("grid boundary carries non-negligible mass");
  return g;
}

}  // namespace phmm
