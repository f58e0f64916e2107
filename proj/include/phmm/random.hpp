#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "phmm/core.hpp"

namespace phmm {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) pairs, e.g. chain k of a run.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline Vector draw_dirichlet(Rng& rng, const Vector& weights) {
  Vector x(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) x[i] = std::gamma_distribution<double>(weights[i], 1.0)(rng);
  const double s = x.sum();
  if (!(s > 0.0)) throw NumericalError("Dirichlet draw underflowed");
  return x / s;
}

// Categorical draw from unnormalized non-negative weights.
inline int draw_categorical(Rng& rng, std::span<const double> w) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = uniform01(rng) * total;
  int last_positive = 0;
  for (int k = 0; k < static_cast<int>(w.size()); ++k) {
    if (w[k] <= 0.0) continue;
    if (u < w[k]) return k;
    u -= w[k];
    last_positive = k;
  }
  return last_positive;
}

}  // namespace phmm
