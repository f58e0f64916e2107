#pragma once

// Scaled forward filter and backward sampling of the latent path.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/emission.hpp"
#include "phmm/random.hpp"

namespace phmm {

// Emission likelihoods for every count value that occurs, stored relative to
// the best state so that large counts do not underflow.
class EmissionTable {
 public:
  EmissionTable() = default;
  EmissionTable(const EmissionParams& emission, int max_count, double dt) { rebuild(emission, max_count, dt); }

  // Per-state Poisson means, in any order.
  EmissionTable(std::span<const double> means, int max_count) { rebuild_means(means, max_count); }

  void rebuild(const EmissionParams& emission, int max_count, double dt) {
    means_.resize(emission.num_states());
    for (int k = 0; k < emission.num_states(); ++k) means_[k] = emission.total_rate(k) * dt;
    rebuild_means(means_, max_count);
  }

  void rebuild_means(std::span<const double> means, int max_count) {
    n_ = static_cast<int>(means.size());
    rel_.assign(static_cast<std::size_t>(max_count + 1) * n_, 0.0);
    log_max_.assign(max_count + 1, 0.0);
    std::vector<double> lp(n_);
    for (int c = 0; c <= max_count; ++c) {
      double m = -INFINITY;
      for (int k = 0; k < n_; ++k) {
        lp[k] = log_poisson_pmf(c, means[k]);
        m = std::max(m, lp[k]);
      }
      log_max_[c] = m;
      for (int k = 0; k < n_; ++k) rel_[c * n_ + k] = std::exp(lp[k] - m);
    }
  }

  const double* relative(int count) const { return rel_.data() + static_cast<std::size_t>(count) * n_; }
  double log_offset(int count) const { return log_max_[count]; }

 private:
  int n_ = 0;
  std::vector<double> rel_;
  std::vector<double> log_max_;
  std::vector<double> means_;
};

// Row t holds alpha_t normalized to sum 1; log_scale[t] keeps what was divided
// out, so the log-likelihood is the sum of log_scale.
struct ForwardMatrix {
  int n = 0;
  std::size_t T = 0;
  std::vector<double> alpha;
  std::vector<double> log_scale;

  const double* row(std::size_t t) const { return alpha.data() + t * n; }
  double prob(std::size_t t, int k) const { return alpha[t * n + k]; }

  double log_likelihood() const {
    double s = 0.0;
    for (double v : log_scale) s += v;
    return s;
  }
};

inline void forward_filter_into(std::span<const int> counts, const EmissionTable& table, const TransitionKernels& kernels,
                                const Vector& pi0, ForwardMatrix& out) {
  const int n = kernels.num_states();
  const std::size_t T = counts.size();
  out.n = n;
  out.T = T;
  out.alpha.resize(T * n);
  out.log_scale.resize(T);
  if (T == 0) return;

  double* a = out.alpha.data();
  const double* e = table.relative(counts[0]);
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    a[k] = pi0[k] * e[k];
    s += a[k];
  }
  if (!(s > 0.0)) throw NumericalError("forward filter: zero probability at t = 1");
  for (int k = 0; k < n; ++k) a[k] /= s;
  out.log_scale[0] = std::log(s) + table.log_offset(counts[0]);

  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = a + (t - 1) * n;
    double* cur = a + t * n;
    const double* P = kernels.block(t - 1);
    e = table.relative(counts[t]);
    s = 0.0;
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int i = 0; i < n; ++i) v += prev[i] * P[i * n + j];
      cur[j] = v * e[j];
      s += cur[j];
    }
    if (!(s > 0.0)) throw NumericalError("forward filter: zero probability at t = " + std::to_string(t + 1));
    const double inv = 1.0 / s;
    for (int j = 0; j < n; ++j) cur[j] *= inv;
    out.log_scale[t] = std::log(s) + table.log_offset(counts[t]);
  }
}

inline ForwardMatrix forward_filter(std::span<const int> counts, const EmissionParams& emission,
                                    const TransitionKernels& kernels, const Vector& pi0, double dt = 1.0) {
  const int max_count = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  EmissionTable table(emission, max_count, dt);
  ForwardMatrix f;
  forward_filter_into(counts, table, kernels, pi0, f);
  return f;
}

// X_T ~ alpha_T, then X_t ~ alpha_t(i) P_t[i, X_{t+1}] for t = T-1..1.
inline void backward_sample_into(const ForwardMatrix& forward, const TransitionKernels& kernels, Rng& rng,
                                 std::vector<std::uint8_t>& path) {
  const int n = forward.n;
  const std::size_t T = forward.T;
  path.resize(T);
  if (T == 0) return;
  std::vector<double> w(n);
  path[T - 1] = static_cast<std::uint8_t>(draw_categorical(rng, std::span<const double>(forward.row(T - 1), n)));
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* a = forward.row(t);
    const double* P = kernels.block(t);
    const int next = path[t + 1];
    for (int i = 0; i < n; ++i) w[i] = a[i] * P[i * n + next];
    path[t] = static_cast<std::uint8_t>(draw_categorical(rng, w));
  }
}

inline std::vector<std::uint8_t> backward_sample(const ForwardMatrix& forward, const TransitionKernels& kernels,
                                                 Rng& rng) {
  std::vector<std::uint8_t> path;
  backward_sample_into(forward, kernels, rng, path);
  return path;
}

}  // namespace phmm
