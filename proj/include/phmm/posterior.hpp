#pragma once

// Retained MCMC draws plus the summaries reported for them.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/model.hpp"

namespace phmm {

struct DrawInfo {
  long iteration = 0;
  int chain = 0;
  double log_likelihood = 0.0;
  std::size_t switches = 0;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
  double ess = 0.0;

  bool covers(double x) const { return lower <= x && x <= upper; }
};

struct PosteriorSample {
  int states = 2;
  TransitionModel model = TransitionModel::penalized;
  double dt = 1.0;
  std::vector<double> covariate;  // w_t, covariate model only

  std::vector<ParamState> draws;
  std::vector<DrawInfo> info;

  // T x n, averaged over every post-burn-in iteration.
  Matrix state_marginals;
  double mean_switches = 0.0;  // over every post-burn-in iteration
  double accept_rate = 0.0;    // MH acceptance after burn-in; NaN for pure Gibbs
  double final_log_step = 0.0;
  long post_burn_iterations = 0;

  std::vector<std::string> names;
  Matrix values;  // draws x names
  std::vector<Summary> summaries;

  std::size_t T() const { return static_cast<std::size_t>(state_marginals.rows()); }

  const Summary& summary(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("no parameter named " + name);
    return summaries[static_cast<std::size_t>(it - names.begin())];
  }

  bool has(const std::string& name) const { return std::find(names.begin(), names.end(), name) != names.end(); }
};

// Kernel(s) a draw implies for the whole series.
inline TransitionKernels draw_kernels(const ParamState& draw, double dt, std::span<const double> w) {
  return std::visit(
      [&](const auto& tr) -> TransitionKernels {
        using T = std::decay_t<decltype(tr)>;
        if constexpr (std::is_same_v<T, ProbabilityRows>) {
          return TransitionKernels(tr);
        } else if constexpr (std::is_same_v<T, SwitchRates>) {
          return TransitionKernels(ptm_from_rates(tr, dt));
        } else {
          const int n = tr.num_states();
          TransitionKernels k = TransitionKernels::varying(n, w.size());
          fill_covariate_kernels(tr, covariate_responses(w, tr.alpha), dt, k);
          return k;
        }
      },
      draw.transitions);
}

// Time-averaged switching rates e^mu c(beta) of a covariate draw.
inline SwitchRates average_rates(const CovariateParams& p, std::span<const double> w) {
  const int n = p.num_states();
  SwitchRates r{Matrix::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) r.gamma(i, j) = std::exp(p.mu(i, j)) * c_normalizer(p.beta(i, j), w, p.alpha);
  return r;
}

// Representative constant kernel of a draw (the time-averaged one for covariate draws).
inline ProbabilityRows summary_kernel(const ParamState& draw, double dt, std::span<const double> w) {
  return std::visit(
      [&](const auto& tr) -> ProbabilityRows {
        using T = std::decay_t<decltype(tr)>;
        if constexpr (std::is_same_v<T, ProbabilityRows>) {
          return tr;
        } else if constexpr (std::is_same_v<T, SwitchRates>) {
          return ptm_from_rates(tr, dt);
        } else {
          return ptm_from_rates(average_rates(tr, w), dt);
        }
      },
      draw.transitions);
}

inline void scalar_parameters(const ParamState& draw, double dt, std::span<const double> w,
                              std::vector<std::string>* names, std::vector<double>& values) {
  const int n = draw.num_states();
  auto put = [&](std::string name, double v) {
    if (names) names->push_back(std::move(name));
    values.push_back(v);
  };
  put("lambda_" + state_label(0, n), draw.emission.lambda_base);
  for (int k = 1; k < n; ++k) {
    put("lambda_" + state_label(k, n) + "_incr", draw.emission.lambda_incr[k - 1]);
    put("lambda_" + state_label(k, n) + "_total", draw.emission.total_rate(k));
  }
  std::visit(
      [&](const auto& tr) {
        using T = std::decay_t<decltype(tr)>;
        if constexpr (std::is_same_v<T, ProbabilityRows>) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("p_" + pair_label(i, j, n), tr.p(i, j));
        } else if constexpr (std::is_same_v<T, SwitchRates>) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("gamma_" + pair_label(i, j, n), tr.gamma(i, j));
        } else {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("mu_" + pair_label(i, j, n), tr.mu(i, j));
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("exp_mu_" + pair_label(i, j, n), std::exp(tr.mu(i, j)));
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("beta_" + pair_label(i, j, n), tr.beta(i, j));
          put("alpha", tr.alpha);
          const SwitchRates avg = average_rates(tr, w);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (i != j) put("gamma_" + pair_label(i, j, n), avg.gamma(i, j));
        }
      },
      draw.transitions);
  put("switches", static_cast<double>(count_switches(draw.path)));
}

// Linear-interpolated empirical quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return NAN;
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Geyer's initial positive sequence estimator.
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t m = x.size();
  if (m < 4) return static_cast<double>(m);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < m; ++t) s += (x[t] - mean) * (x[t + lag] - mean);
    return s / static_cast<double>(m);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(m);
  double sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < m; ++k) {
    const double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum / c0 - 1.0);
  return static_cast<double>(m) / tau;
}

inline Summary summarize(std::span<const double> x) {
  Summary s;
  if (x.empty()) return s;
  const double m = static_cast<double>(x.size());
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.sd = x.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  s.lower = sorted_quantile(sorted, 0.025);
  s.upper = sorted_quantile(sorted, 0.975);
  s.ess = effective_sample_size(x);
  return s;
}

// Fills names, values and summaries from draws. Draws from several chains are
// concatenated; ESS is then computed over the concatenation.
inline void finalize_summaries(PosteriorSample& sample) {
  sample.names.clear();
  sample.summaries.clear();
  if (sample.draws.empty()) {
    sample.values.resize(0, 0);
    return;
  }
  std::vector<double> row;
  scalar_parameters(sample.draws.front(), sample.dt, sample.covariate, &sample.names, row);
  sample.values.resize(static_cast<Eigen::Index>(sample.draws.size()), static_cast<Eigen::Index>(sample.names.size()));
  for (std::size_t d = 0; d < sample.draws.size(); ++d) {
    row.clear();
    scalar_parameters(sample.draws[d], sample.dt, sample.covariate, nullptr, row);
    for (std::size_t k = 0; k < row.size(); ++k) sample.values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = row[k];
  }
  std::vector<double> col(sample.draws.size());
  for (std::size_t k = 0; k < sample.names.size(); ++k) {
    for (std::size_t d = 0; d < col.size(); ++d) col[d] = sample.values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    sample.summaries.push_back(summarize(col));
  }
}

inline ProbabilityRows posterior_mean_ptm(const PosteriorSample& sample) {
  if (sample.draws.empty()) throw Error("empty posterior sample");
  Matrix acc = Matrix::Zero(sample.states, sample.states);
  for (const auto& d : sample.draws) acc += summary_kernel(d, sample.dt, sample.covariate).p;
  return ProbabilityRows{acc / static_cast<double>(sample.draws.size())};
}

// Most probable state per time step (0-based).
inline std::vector<int> modal_path(const PosteriorSample& sample) {
  std::vector<int> out(sample.T());
  for (std::size_t t = 0; t < out.size(); ++t) {
    Eigen::Index k = 0;
    sample.state_marginals.row(static_cast<Eigen::Index>(t)).maxCoeff(&k);
    out[t] = static_cast<int>(k);
  }
  return out;
}

}  // namespace phmm
