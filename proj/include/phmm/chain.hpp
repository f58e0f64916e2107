#pragma once

// Transition kernels: Dirichlet rows for the standard model, one-jump CTMC
// kernels built from switching rates, and covariate-driven time-varying
// kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "phmm/core.hpp"
#include "phmm/random.hpp"

namespace phmm {

// ---------------------------------------------------------------------------
// standard model

inline ProbabilityRows update_dirichlet_rows(std::span<const std::uint8_t> path, const Matrix& theta, Rng& rng) {
  const int n = static_cast<int>(theta.rows());
  CountMatrix counts = CountMatrix::Zero(n, n);
  for (std::size_t t = 1; t < path.size(); ++t) ++counts(path[t - 1], path[t]);
  ProbabilityRows out{Matrix(n, n)};
  for (int i = 0; i < n; ++i) {
    Vector w = theta.row(i).transpose() + counts.row(i).transpose().cast<double>();
    out.p.row(i) = draw_dirichlet(rng, w).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// rate-derived kernels

// Every row satisfies g e^{-g dt} <= 1 whenever dt >= 1/e, since the maximum
// over g sits at g = 1/dt with value 1/(e dt).
inline bool is_valid_ptm_regime(const SwitchRates& rates, double dt) {
  if (dt >= std::exp(-1.0)) return true;
  for (int i = 0; i < rates.num_states(); ++i) {
    const double g = rates.exit_rate(i);
    if (g * std::exp(-g * dt) > 1.0) return false;
  }
  return true;
}

// p_ij = gamma_ij exp(-gamma_i. dt) off the diagonal; the diagonal takes the rest.
inline ProbabilityRows ptm_from_rates(const SwitchRates& rates, double dt) {
  const int n = rates.num_states();
  ProbabilityRows out{Matrix::Zero(n, n)};
  for (int i = 0; i < n; ++i) {
    const double stay = std::exp(-rates.exit_rate(i) * dt);
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!(rates.gamma(i, j) >= 0.0)) throw InvalidRegime("negative switching rate");
      out.p(i, j) = rates.gamma(i, j) * stay;
      off += out.p(i, j);
    }
    if (off > 1.0) throw InvalidRegime("off-diagonal row sum exceeds 1 in row " + std::to_string(i + 1));
    out.p(i, i) = 1.0 - off;
  }
  return out;
}

// ---------------------------------------------------------------------------
// covariate model

enum class CovariateTransform {
  elapsed,  // w_t = seconds since the most recent entrance
  inverse,  // w_t = 1 / (seconds since the most recent entrance)
};

inline double covariate_response(double w, double alpha) {
  if (!(w > 0.0)) return 1.0;
  return 1.0 / (std::pow(w, alpha) + 1.0);
}

inline SwitchRates rates_from_covariates(const CovariateParams& params, double w) {
  const int n = params.num_states();
  const double f = covariate_response(w, params.alpha);
  SwitchRates r{Matrix::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) r.gamma(i, j) = std::exp(params.mu(i, j) + params.beta(i, j) * f);
  return r;
}

inline ProbabilityRows ptm_from_covariates(const CovariateParams& params, double w, double dt) {
  return ptm_from_rates(rates_from_covariates(params, w), dt);
}

inline constexpr double kDefaultInitialOffset = 1e6;

// w_1..w_T from 1-based entrance bins. Before the first entrance the clock
// starts at `initial_offset` seconds.
inline std::vector<double> covariate_series(std::span<const int> entrance_times, std::size_t T, double dt,
                                            double initial_offset = kDefaultInitialOffset,
                                            CovariateTransform transform = CovariateTransform::elapsed) {
  std::vector<double> w(T);
  std::size_t next = 0;
  long last_entry = -1;
  for (std::size_t t = 1; t <= T; ++t) {
    while (next < entrance_times.size() && static_cast<std::size_t>(entrance_times[next]) <= t)
      last_entry = entrance_times[next++];
    double elapsed = last_entry < 0 ? static_cast<double>(t - 1) * dt + initial_offset
                                    : static_cast<double>(static_cast<long>(t) - last_entry) * dt;
    elapsed = std::max(elapsed, 0.0);
    w[t - 1] = transform == CovariateTransform::elapsed ? elapsed : 1.0 / elapsed;
  }
  return w;
}

// Mean of exp(beta f(w_t)) over the series.
inline double c_normalizer(double beta, std::span<const double> w, double alpha) {
  if (w.empty()) throw ConfigError("c_normalizer needs a non-empty series");
  double s = 0.0;
  for (double x : w) s += std::exp(beta * covariate_response(x, alpha));
  return s / static_cast<double>(w.size());
}

// ---------------------------------------------------------------------------
// kernel sequences

// Either one kernel shared by every step or one kernel per time index. The
// kernel at index t governs the move X_t -> X_{t+1} (0-based).
class TransitionKernels {
 public:
  TransitionKernels() = default;

  explicit TransitionKernels(const ProbabilityRows& constant) : n_(constant.num_states()), steps_(0) {
    data_.resize(static_cast<std::size_t>(n_) * n_);
    store(0, constant.p);
  }

  static TransitionKernels varying(int n, std::size_t steps) {
    TransitionKernels k;
    k.n_ = n;
    k.steps_ = steps;
    k.data_.assign(steps * n * n, 0.0);
    return k;
  }

  static TransitionKernels varying(const std::vector<ProbabilityRows>& seq) {
    if (seq.empty()) throw ConfigError("empty kernel sequence");
    TransitionKernels k = varying(seq.front().num_states(), seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) k.store(t, seq[t].p);
    return k;
  }

  int num_states() const { return n_; }
  bool is_constant() const { return steps_ == 0; }
  std::size_t steps() const { return steps_; }

  double operator()(std::size_t t, int i, int j) const { return data_[offset(t) + i * n_ + j]; }

  // Row-major n x n block.
  const double* block(std::size_t t) const { return data_.data() + offset(t); }
  double* mutable_block(std::size_t t) { return data_.data() + offset(t); }

  ProbabilityRows at(std::size_t t) const {
    ProbabilityRows out{Matrix(n_, n_)};
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out.p(i, j) = (*this)(t, i, j);
    return out;
  }

  void store(std::size_t t, const Matrix& p) {
    double* b = mutable_block(t);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) b[i * n_ + j] = p(i, j);
  }

 private:
  std::size_t offset(std::size_t t) const { return steps_ == 0 ? 0 : t * n_ * n_; }

  int n_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> data_;
};

// Fills one kernel per step from precomputed f(w_t); throws InvalidRegime.
inline void fill_covariate_kernels(const CovariateParams& params, std::span<const double> response, double dt,
                                   TransitionKernels& out) {
  const int n = params.num_states();
  for (std::size_t t = 0; t < response.size(); ++t) {
    double* b = out.mutable_block(t);
    const double f = response[t];
    for (int i = 0; i < n; ++i) {
      double exit = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        b[i * n + j] = std::exp(params.mu(i, j) + params.beta(i, j) * f);
        exit += b[i * n + j];
      }
      const double stay = std::exp(-exit * dt);
      double off = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        b[i * n + j] *= stay;
        off += b[i * n + j];
      }
      if (off > 1.0) throw InvalidRegime("covariate kernel row sum exceeds 1");
      b[i * n + i] = 1.0 - off;
    }
  }
}

inline std::vector<double> covariate_responses(std::span<const double> w, double alpha) {
  std::vector<double> f(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) f[t] = covariate_response(w[t], alpha);
  return f;
}

// ---------------------------------------------------------------------------
// stationary distribution

inline bool is_irreducible(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) reach[i][j] = i == j || p(i, j) > 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!reach[i][j]) return false;
  return true;
}

inline Vector stationary_distribution(const ProbabilityRows& P) {
  P.validate(1e-9);
  const int n = P.num_states();
  if (!is_irreducible(P.p)) throw Reducible("transition matrix is reducible; stationary distribution not unique");
  Matrix A = P.p.transpose() - Matrix::Identity(n, n);
  A.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector delta = A.colPivHouseholderQr().solve(rhs);
  const double residual = (delta.transpose() * P.p - delta.transpose()).cwiseAbs().maxCoeff();
  if (!(residual < 1e-10)) throw NumericalError("stationary solve residual too large");
  return delta;
}

}  // namespace phmm
