#pragma once

// Model and run configuration.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"

namespace phmm {

enum class TransitionModel { standard, penalized, covariate };

inline std::string to_string(TransitionModel m) {
  switch (m) {
    case TransitionModel::standard:
      return "standard";
    case TransitionModel::penalized:
      return "penalized";
    case TransitionModel::covariate:
      return "covariate";
  }
  return "?";
}

inline std::string to_string(PenaltyFamily f) {
  switch (f) {
    case PenaltyFamily::none:
      return "none";
    case PenaltyFamily::ridge:
      return "ridge";
    case PenaltyFamily::lasso:
      return "lasso";
  }
  return "?";
}

inline std::string to_string(CovariateTransform t) {
  return t == CovariateTransform::elapsed ? "elapsed" : "inverse";
}

struct InitialValues {
  std::vector<double> lambda_totals;  // per state, non-decreasing
  Matrix p;                           // standard model
  double gamma = 0.003;               // penalized model, every off-diagonal
  double mu = std::log(0.003);        // covariate model
  double beta = 0.0;
  double alpha = 1.0;

  static InitialValues defaults(int n) {
    InitialValues v;
    v.lambda_totals.resize(n);
    for (int k = 0; k < n; ++k) v.lambda_totals[k] = n == 1 ? 0.007 : 0.007 + (0.05 - 0.007) * k / (n - 1);
    v.p = Matrix::Constant(n, n, 0.003 / (n - 1));
    v.p.diagonal().setConstant(0.997);
    return v;
  }
};

struct CovariateSettings {
  CovariateTransform transform = CovariateTransform::elapsed;
  double initial_offset = kDefaultInitialOffset;
  // Base proposal scales for (mu..., beta..., alpha); empty means all ones.
  std::vector<double> proposal_scales;
};

struct ModelSpec {
  int states = 2;
  TransitionModel model = TransitionModel::penalized;
  PenaltySpec penalty;
  Hyperparams hyper = Hyperparams::defaults(2);
  InitialValues init = InitialValues::defaults(2);
  CovariateSettings covariate;

  static ModelSpec defaults(int n, TransitionModel model) {
    ModelSpec s;
    s.states = n;
    s.model = model;
    s.hyper = Hyperparams::defaults(n);
    s.init = InitialValues::defaults(n);
    return s;
  }

  void validate() const {
    if (states < 2) throw ConfigError("need at least 2 states");
    if (states > 255) throw ConfigError("at most 255 states");
    hyper.validate(states);
    if (model != TransitionModel::standard) penalty.validate();
    if (static_cast<int>(init.lambda_totals.size()) != states)
      throw ConfigError("init.lambda needs one total rate per state");
    EmissionParams::from_totals(init.lambda_totals);
    if (model == TransitionModel::standard) {
      if (init.p.rows() != states || init.p.cols() != states) throw ConfigError("init.p must be n x n");
      ProbabilityRows{init.p}.validate(1e-9);
    }
    if (model == TransitionModel::penalized && !(init.gamma > 0.0)) throw ConfigError("init.gamma must be positive");
    if (model == TransitionModel::covariate) {
      if (!std::isfinite(init.mu) || !std::isfinite(init.beta) || !std::isfinite(init.alpha))
        throw ConfigError("covariate initial values must be finite");
      const std::size_t dim = 2 * static_cast<std::size_t>(states) * (states - 1) + 1;
      if (!covariate.proposal_scales.empty() && covariate.proposal_scales.size() != dim)
        throw ConfigError("covariate.proposal_scales needs " + std::to_string(dim) + " entries");
    }
  }
};

struct McmcSettings {
  long iters = 50000;
  long burn_in = 25000;
  long thin = 10;
  double target_accept_rates = 0.44;
  double target_accept_covariate = 0.234;
  int adapt_batch = 50;
  double initial_step = 0.2;
  bool keep_augmented = false;

  void validate() const {
    if (!(iters > burn_in && burn_in >= 0)) throw ConfigError("need iters > burn_in >= 0");
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (adapt_batch < 1) throw ConfigError("adapt batch must be >= 1");
    if (!(initial_step >= 0.0)) throw ConfigError("initial step must be >= 0");
    if (!(target_accept_rates > 0 && target_accept_rates < 1 && target_accept_covariate > 0 &&
          target_accept_covariate < 1))
      throw ConfigError("target acceptance rates must be in (0, 1)");
  }
};

}  // namespace phmm
