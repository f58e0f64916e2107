#pragma once

// Shared domain types for penalized Poisson hidden Markov models.
//
// States are indexed 0..n-1 in memory. Everything user facing (CSV, JSON,
// CLI) reports them as 1..n, with the labels L/H (n = 2) or L/M/H (n = 3).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace phmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CountMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidRegime : Error {
  using Error::Error;
};
struct Reducible : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct ParseError : DataError {
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};
struct OutOfRange : DataError {
  using DataError::DataError;
};
struct TooLarge : Error {
  using Error::Error;
};
struct SupportNotCovered : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// labels

inline std::string state_label(int k, int n) {
  if (n == 2) return k == 0 ? "L" : "H";
  if (n == 3) return k == 0 ? "L" : (k == 1 ? "M" : "H");
  return std::to_string(k + 1);
}

inline std::string pair_label(int i, int j, int n) {
  return state_label(i, n) + state_label(j, n);
}

// ---------------------------------------------------------------------------
// data

struct CountSeries {
  std::vector<int> counts;
  double dt = 1.0;
  // 1-based bin indices, strictly increasing.
  std::vector<int> entrance_times;

  std::size_t size() const { return counts.size(); }

  void validate() const {
    if (counts.size() < 2) throw DataError("count series needs at least 2 bins");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DataError("dt must be positive");
    for (int c : counts)
      if (c < 0) throw DataError("negative count");
    for (std::size_t i = 0; i < entrance_times.size(); ++i) {
      const int e = entrance_times[i];
      if (e < 1 || static_cast<std::size_t>(e) > counts.size())
        throw DataError("entrance time " + std::to_string(e) + " outside [1, T]");
      if (i > 0 && entrance_times[i - 1] >= e)
        throw DataError("entrance times must be strictly increasing");
    }
  }
};

// ---------------------------------------------------------------------------
// parameters

// State k has total rate lambda_base + lambda_incr[0] + ... + lambda_incr[k-1],
// so totals are non-decreasing in k and labels cannot switch.
struct EmissionParams {
  double lambda_base = 0.007;
  std::vector<double> lambda_incr{0.043};

  int num_states() const { return static_cast<int>(lambda_incr.size()) + 1; }

  double total_rate(int k) const {
    double r = lambda_base;
    for (int i = 0; i < k; ++i) r += lambda_incr[i];
    return r;
  }

  Vector totals() const {
    Vector t(num_states());
    for (int k = 0; k < num_states(); ++k) t[k] = total_rate(k);
    return t;
  }

  static EmissionParams from_totals(const std::vector<double>& totals) {
    if (totals.empty()) throw ConfigError("emission totals must be non-empty");
    EmissionParams e;
    e.lambda_base = totals[0];
    e.lambda_incr.clear();
    for (std::size_t k = 1; k < totals.size(); ++k) e.lambda_incr.push_back(totals[k] - totals[k - 1]);
    e.validate();
    return e;
  }

  void validate() const {
    if (!(lambda_base > 0.0)) throw ConfigError("lambda_base must be positive");
    for (double d : lambda_incr)
      if (!(d >= 0.0)) throw ConfigError("emission increments must be non-negative (totals non-decreasing)");
  }
};

struct ProbabilityRows {
  Matrix p;

  int num_states() const { return static_cast<int>(p.rows()); }

  void validate(double tol = 1e-12) const {
    if (p.rows() != p.cols() || p.rows() < 1) throw ConfigError("transition matrix must be square");
    for (int i = 0; i < p.rows(); ++i) {
      for (int j = 0; j < p.cols(); ++j)
        if (!(p(i, j) >= 0.0 && p(i, j) <= 1.0)) throw ConfigError("transition probability outside [0, 1]");
      if (std::abs(p.row(i).sum() - 1.0) > tol) throw ConfigError("transition row does not sum to 1");
    }
  }
};

// gamma(i, j) is the rate of switching i -> j per second. The diagonal is
// ignored and kept at zero.
struct SwitchRates {
  Matrix gamma;

  int num_states() const { return static_cast<int>(gamma.rows()); }

  double exit_rate(int i) const {
    double s = 0.0;
    for (int j = 0; j < gamma.cols(); ++j)
      if (j != i) s += gamma(i, j);
    return s;
  }

  static SwitchRates uniform(int n, double rate) {
    SwitchRates r{Matrix::Constant(n, n, rate)};
    r.gamma.diagonal().setZero();
    return r;
  }
};

// Switching rate gamma_ijt = exp(mu_ij + beta_ij * f(w_t)), f(w) = 1 / (w^alpha + 1).
struct CovariateParams {
  Matrix mu;
  Matrix beta;
  double alpha = 1.0;

  int num_states() const { return static_cast<int>(mu.rows()); }
};

enum class PenaltyFamily { none, ridge, lasso };

// Ridge: half-normal with *variance* tau, density ∝ exp(-g^2 / (2 tau)).
// Lasso: exponential with mean tau.
struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::ridge;
  double tau = std::exp(-6.0);

  void validate() const {
    if (family != PenaltyFamily::none && !(tau > 0.0 && std::isfinite(tau)))
      throw ConfigError("penalty tau must be positive");
  }

  // Unnormalized log prior of a single rate g > 0.
  double log_prior(double g) const {
    switch (family) {
      case PenaltyFamily::ridge:
        return -g * g / (2.0 * tau);
      case PenaltyFamily::lasso:
        return -g / tau;
      case PenaltyFamily::none:
        break;
    }
    return 0.0;
  }
};

struct Hyperparams {
  double a = 1.0;
  double b = 1.0;
  // Gamma(shape, rate) priors on increments 2..n: (c, d), (e, f), ...
  std::vector<double> incr_shape{1.0};
  std::vector<double> incr_rate{1.0};
  Matrix theta;
  Vector pi0;
  double beta_mean = 1.0;
  double beta_var = 100.0;
  double alpha_mean = 1.0;
  double alpha_var = 10.0;

  static Hyperparams defaults(int n) {
    Hyperparams h;
    h.incr_shape.assign(n - 1, 1.0);
    h.incr_rate.assign(n - 1, 1.0);
    h.theta = Matrix::Ones(n, n);
    h.theta.diagonal().setConstant(120000.0);
    h.pi0 = Vector::Constant(n, 1.0 / n);
    return h;
  }

  void validate(int n) const {
    if (!(a > 0 && b > 0)) throw ConfigError("a and b must be positive");
    if (static_cast<int>(incr_shape.size()) != n - 1 || static_cast<int>(incr_rate.size()) != n - 1)
      throw ConfigError("need n-1 increment shape/rate pairs");
    for (int k = 0; k < n - 1; ++k)
      if (!(incr_shape[k] > 0 && incr_rate[k] > 0)) throw ConfigError("increment hyperparameters must be positive");
    if (theta.rows() != n || theta.cols() != n) throw ConfigError("theta must be n x n");
    if ((theta.array() <= 0.0).any()) throw ConfigError("theta entries must be positive");
    if (pi0.size() != n || (pi0.array() < 0.0).any() || std::abs(pi0.sum() - 1.0) > 1e-9)
      throw ConfigError("pi0 must be a probability vector of length n");
    if (!(beta_var > 0 && alpha_var > 0)) throw ConfigError("prior variances must be positive");
  }
};

using TransitionParams = std::variant<ProbabilityRows, SwitchRates, CovariateParams>;

// One MCMC draw.
struct ParamState {
  EmissionParams emission;
  TransitionParams transitions;
  std::vector<std::uint8_t> path;  // 0-based states
  // n x T split counts; may be empty in stored draws.
  CountMatrix augmented_counts;

  int num_states() const { return emission.num_states(); }
};

inline std::size_t count_switches(const std::vector<std::uint8_t>& path) {
  std::size_t s = 0;
  for (std::size_t t = 1; t < path.size(); ++t) s += path[t] != path[t - 1];
  return s;
}

inline CountMatrix transition_counts(const std::vector<std::uint8_t>& path, int n) {
  CountMatrix c = CountMatrix::Zero(n, n);
  for (std::size_t t = 1; t < path.size(); ++t) ++c(path[t - 1], path[t]);
  return c;
}

}  // namespace phmm
