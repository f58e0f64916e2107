#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>

#include "phmm/mh.hpp"
#include "phmm/simulate.hpp"

using namespace phmm;

namespace {

// Largest gap between an empirical CDF and a reference CDF.
double kolmogorov(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return d;
}

// Adaptive rate MH: adapts during burn-in, then records gamma(from, to) every `thin` steps.
std::vector<double> rate_chain(SwitchRates g, const std::vector<std::uint8_t>& path, const PenaltySpec& penalty,
                               long burn, long keep, int thin, Rng& rng, int from = 0, int to = 1) {
  MhAdapter a;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(keep));
  for (long it = 1; it <= burn + keep * thin; ++it) {
    if (it == burn + 1) a.frozen = true;
    auto r = update_rates_mh(g, path, penalty, a, rng);
    g = r.value;
    a = adapt(a, r.accepted, it);
    if (it > burn && (it - burn) % thin == 0) out.push_back(g.gamma(from, to));
  }
  return out;
}

std::vector<std::uint8_t> path_with_switches(std::size_t T, const std::vector<std::size_t>& switch_at) {
  std::vector<std::uint8_t> p(T, 0);
  std::uint8_t s = 0;
  std::size_t next = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (next < switch_at.size() && switch_at[next] == t) {
      s = static_cast<std::uint8_t>(1 - s);
      ++next;
    }
    p[t] = s;
  }
  return p;
}

double quantile(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  return x[static_cast<std::size_t>(q * static_cast<double>(x.size() - 1))];
}

}  // namespace

TEST(Adapt, AllAcceptedIncreasesStep) {
  MhAdapter a;
  const double before = a.log_step;
  for (int i = 1; i <= a.batch; ++i) a = adapt(a, true, i);
  EXPECT_NEAR(a.log_step, before + 0.5, 1e-15);
}

TEST(Adapt, AllRejectedDecreasesStep) {
  MhAdapter a;
  const double before = a.log_step;
  for (int i = 1; i <= a.batch; ++i) a = adapt(a, false, i);
  EXPECT_NEAR(a.log_step, before - 0.5, 1e-15);
}

TEST(Adapt, ExactTargetLeavesStepUnchanged) {
  MhAdapter a;
  a.target_accept = 0.44;
  const double before = a.log_step;
  for (int i = 1; i <= a.batch; ++i) a = adapt(a, i <= 22, i);
  EXPECT_EQ(a.log_step, before);
  EXPECT_EQ(a.batches_done, 1);
}

TEST(Adapt, ChangesDiminishAndFreezeHolds) {
  MhAdapter a;
  a.batch = 1;
  std::vector<double> deltas;
  for (int i = 1; i <= 100; ++i) {
    const double before = a.log_step;
    a = adapt(a, true, i);
    deltas.push_back(a.log_step - before);
  }
  EXPECT_EQ(deltas[0], 0.5);
  EXPECT_NEAR(deltas[3], 0.5, 1e-15);
  EXPECT_NEAR(deltas[99], 0.1, 1e-12);
  for (std::size_t i = 1; i < deltas.size(); ++i) EXPECT_LE(deltas[i], deltas[i - 1] + 1e-12);
  a.frozen = true;
  const double before = a.log_step;
  for (int i = 101; i < 200; ++i) a = adapt(a, true, i);
  EXPECT_EQ(a.log_step, before);
  EXPECT_THROW(adapt(a, true, 0), ConfigError);
}

TEST(RatesMh, ZeroStepAlwaysAccepts) {
  Rng rng = make_rng(41);
  MhAdapter a;
  a.log_step = -std::numeric_limits<double>::infinity();
  const auto path = path_with_switches(100, {10, 60});
  SwitchRates g{Matrix::Constant(2, 2, 0.01)};
  for (int i = 0; i < 200; ++i) {
    const auto r = update_rates_mh(g, path, PenaltySpec{}, a, rng);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.value.gamma, g.gamma);
  }
}

TEST(RatesMh, EmptyLikelihoodRecoversHalfNormalPrior) {
  Rng rng = make_rng(42);
  const PenaltySpec ridge{PenaltyFamily::ridge, 1.0};
  const std::vector<std::uint8_t> path{0};
  const auto chain = rate_chain(SwitchRates::uniform(2, 0.5), path, ridge, 20000, 100000, 10, rng);
  const double tau = ridge.tau;
  const double d = kolmogorov(chain, [tau](double x) { return std::erf(x / std::sqrt(2.0 * tau)); });
  EXPECT_LT(d, 0.02);

  // direct half-normal draws through the same statistic
  std::normal_distribution<double> z(0.0, std::sqrt(tau));
  std::vector<double> direct(100000);
  for (auto& x : direct) x = std::abs(z(rng));
  EXPECT_LT(kolmogorov(direct, [tau](double x) { return std::erf(x / std::sqrt(2.0 * tau)); }), 0.01);
}

TEST(RatesMh, LassoWithoutDataRecoversExponentialPrior) {
  Rng rng = make_rng(43);
  const PenaltySpec lasso{PenaltyFamily::lasso, 0.5};
  const std::vector<std::uint8_t> path{1};
  const auto chain = rate_chain(SwitchRates::uniform(2, 0.5), path, lasso, 20000, 100000, 10, rng, 1, 0);
  EXPECT_LT(kolmogorov(chain, [](double x) { return 1.0 - std::exp(-x / 0.5); }), 0.02);
}

TEST(RatesMh, RidgeShrinksBelowProfileMle) {
  // fast switching, so the ridge term dominates the likelihood's curvature
  Matrix P(2, 2);
  P << 0.85, 0.15, 0.15, 0.85;
  const auto sim = simulate_series(EmissionParams::from_totals({0.1, 1.0}), TransitionKernels(ProbabilityRows{P}),
                                   Vector::Constant(2, 0.5), 3000, 44);
  const CountMatrix c = transition_counts(sim.path, 2);

  // profile MLE per row by golden-section search over g
  auto mle = [&](int i) {
    const int j = 1 - i;
    auto ll = [&](double g) { return c(i, j) * std::log(g * std::exp(-g)) + c(i, i) * std::log1p(-g * std::exp(-g)); };
    double lo = 1e-6, hi = 1.0;
    const double r = (std::sqrt(5.0) - 1) / 2;
    for (int k = 0; k < 200; ++k) {
      const double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
      if (ll(x1) < ll(x2)) lo = x1; else hi = x2;
    }
    return 0.5 * (lo + hi);
  };
  const double mle01 = mle(0), mle10 = mle(1);
  EXPECT_GT(mle01, 0.1);

  Rng rng = make_rng(45);
  const PenaltySpec ridge{PenaltyFamily::ridge, std::exp(-6.0)};
  const auto g01 = rate_chain(SwitchRates::uniform(2, 0.1), sim.path, ridge, 5000, 20000, 2, rng, 0, 1);
  const auto g10 = rate_chain(SwitchRates::uniform(2, 0.1), sim.path, ridge, 5000, 20000, 2, rng, 1, 0);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  EXPECT_LT(mean(g01), mle01);
  EXPECT_LT(mean(g10), mle10);
}

TEST(RatesMh, StationaryMatchesGridOnTinyPath) {
  const auto path = path_with_switches(40, {8, 14, 25});
  const CountMatrix c = transition_counts(path, 2);
  const PenaltySpec ridge{PenaltyFamily::ridge, std::exp(-3.0)};
  // rows factorize, so the marginal of gamma_01 is one-dimensional
  auto log_target = [&](double g) {
    if (!(g > 0)) return -std::numeric_limits<double>::infinity();
    const double p = g * std::exp(-g);
    return c(0, 1) * std::log(p) + c(0, 0) * std::log1p(-p) - g * g / (2 * ridge.tau);
  };
  const GridDensity grid = grid_posterior_1d(log_target, GridSpec{0.0, 1.5, 30001, true, false});
  Rng rng = make_rng(46);
  const auto chain = rate_chain(SwitchRates::uniform(2, 0.1), path, ridge, 20000, 100000, 10, rng);
  EXPECT_LT(kolmogorov(chain, [&](double x) { return grid.cdf(x); }), 0.02);
}

TEST(RatesMh, TargetRejectsInvalidRegime) {
  CountMatrix c = CountMatrix::Zero(2, 2);
  EXPECT_EQ(log_target_rates(SwitchRates::uniform(2, 10.0), c, PenaltySpec{}, 0.1), kNegInf);
  EXPECT_TRUE(std::isfinite(log_target_rates(SwitchRates::uniform(2, 10.0), c, PenaltySpec{}, 1.0)));
}

TEST(CovariateMh, PackRoundTrip) {
  Matrix mu(3, 3), beta(3, 3);
  mu << 0, 1, 2, 3, 0, 4, 5, 6, 0;
  beta << 0, -1, -2, -3, 0, -4, -5, -6, 0;
  const CovariateParams p{mu, beta, 0.25};
  const auto v = pack_covariate(p);
  ASSERT_EQ(v.size(), covariate_dimension(3));
  const auto q = unpack_covariate(v, 3);
  EXPECT_EQ(q.mu, p.mu);
  EXPECT_EQ(q.beta, p.beta);
  EXPECT_EQ(q.alpha, p.alpha);
}

TEST(CovariateMh, ZeroStepsReturnInput) {
  Rng rng = make_rng(47);
  const CovariateParams p{Matrix::Constant(2, 2, -6.0), Matrix::Constant(2, 2, 0.3), 1.0};
  const std::vector<std::uint8_t> path{0, 0, 1};
  const std::vector<double> w{1.0, 2.0, 3.0};
  const auto before = rng;
  const auto r = update_covariate_params_mh(p, path, w, PenaltySpec{}, Hyperparams::defaults(2), MhAdapter{}, rng, 1.0,
                                            {}, 0);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.value.mu, p.mu);
  EXPECT_EQ(r.value.beta, p.beta);
  EXPECT_EQ(r.value.alpha, p.alpha);
  EXPECT_TRUE(rng == before);
}

TEST(CovariateMh, FixedBetaReducesToRateSampler) {
  Matrix P(2, 2);
  P << 0.99, 0.01, 0.03, 0.97;
  const auto sim = simulate_series(EmissionParams::from_totals({0.1, 1.0}), TransitionKernels(ProbabilityRows{P}),
                                   Vector::Constant(2, 0.5), 4000, 48);
  const std::vector<int> entries{100, 900, 2500};
  const auto w = covariate_series(entries, sim.path.size(), 1.0);
  const PenaltySpec ridge{PenaltyFamily::ridge, std::exp(-6.0)};
  const Hyperparams h = Hyperparams::defaults(2);

  Rng rng = make_rng(49);
  const auto rates = rate_chain(SwitchRates::uniform(2, 0.01), sim.path, ridge, 5000, 40000, 5, rng);

  CovariateParams cur{Matrix::Constant(2, 2, std::log(0.01)), Matrix::Zero(2, 2), 1.0};
  cur.mu.diagonal().setZero();
  // mu moves, beta and alpha stay where they are
  const std::vector<double> scales{1.0, 1.0, 0.0, 0.0, 0.0};
  MhAdapter a;
  std::vector<double> cov;
  const long burn = 5000, keep = 40000, thin = 5;
  for (long it = 1; it <= burn + keep * thin; ++it) {
    if (it == burn + 1) a.frozen = true;
    auto r = update_covariate_params_mh(cur, sim.path, w, ridge, h, a, rng, 1.0, scales);
    cur = r.value;
    a = adapt(a, r.accepted, it);
    if (it > burn && (it - burn) % thin == 0) cov.push_back(std::exp(cur.mu(0, 1)));
  }
  EXPECT_EQ(cur.beta(0, 1), 0.0);
  EXPECT_EQ(cur.alpha, 1.0);
  // quantiles agree to within a few percent of the posterior spread
  const double spread = quantile(rates, 0.9) - quantile(rates, 0.1);
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) EXPECT_NEAR(quantile(cov, q), quantile(rates, q), 0.1 * spread) << q;
}

TEST(CovariateMh, BaselinePriorIsScaledHalfNormal) {
  // density of x = e^mu is 2 c / sqrt(2 pi tau) exp(-(c x)^2 / (2 tau)); in mu add log x
  const PenaltySpec ridge{PenaltyFamily::ridge, 0.3};
  const double c = 1.7;
  const GridDensity g = grid_posterior_1d(
      [&](double mu) { return log_baseline_prior(mu, c, ridge); }, GridSpec{-40.0, 5.0, 200001, false, false});
  // E[x] for a half-normal with variance parameter tau / c^2
  double ex = 0.0;
  for (std::size_t i = 1; i < g.x.size(); ++i)
    ex += 0.5 * (g.x[i] - g.x[i - 1]) * (std::exp(g.x[i - 1]) * g.density[i - 1] + std::exp(g.x[i]) * g.density[i]);
  EXPECT_NEAR(ex, std::sqrt(ridge.tau) / c * std::sqrt(2.0 / std::numbers::pi), 1e-6);
}
