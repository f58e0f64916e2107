#pragma once

// MCMC driver. One sweep updates, in order: transition parameters, the latent
// path (forward filter, backward sample), the count split, emission rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/emission.hpp"
#include "phmm/forward_backward.hpp"
#include "phmm/mh.hpp"
#include "phmm/model.hpp"
#include "phmm/posterior.hpp"
#include "phmm/random.hpp"

namespace phmm {

inline TransitionParams initial_transitions(const ModelSpec& spec) {
  const int n = spec.states;
  switch (spec.model) {
    case TransitionModel::standard:
      return ProbabilityRows{spec.init.p};
    case TransitionModel::penalized:
      return SwitchRates::uniform(n, spec.init.gamma);
    case TransitionModel::covariate: {
      CovariateParams c{Matrix::Constant(n, n, spec.init.mu), Matrix::Constant(n, n, spec.init.beta), spec.init.alpha};
      c.mu.diagonal().setZero();
      c.beta.diagonal().setZero();
      return c;
    }
  }
  throw ConfigError("unknown transition model");
}

// Holds the working state of one chain and the buffers reused across sweeps.
class ChainRunner {
 public:
  ChainRunner(const ModelSpec& spec, const CountSeries& data, std::uint64_t seed, std::uint64_t stream = 0)
      : spec_(spec), data_(data), rng_(make_rng(seed, stream)) {
    spec_.validate();
    data_.validate();
    if (spec_.model == TransitionModel::covariate) {
      if (data_.entrance_times.empty())
        throw ConfigError("covariate model needs entrance times");
      w_ = covariate_series(data_.entrance_times, data_.size(), data_.dt, spec_.covariate.initial_offset,
                            spec_.covariate.transform);
    }
    const int n = spec_.states;
    max_count_ = *std::max_element(data_.counts.begin(), data_.counts.end());
    for (std::size_t t = 0; t < data_.size(); ++t)
      if (data_.counts[t] > 0) nonzero_.push_back(t);

    state_.emission = EmissionParams::from_totals(spec_.init.lambda_totals);
    state_.transitions = initial_transitions(spec_);
    state_.augmented_counts = CountMatrix::Zero(n, static_cast<Eigen::Index>(data_.size()));
    if (spec_.model == TransitionModel::covariate) kernels_ = TransitionKernels::varying(n, data_.size());

    // the first path is an exact draw given the initial parameters
    table_.rebuild(state_.emission, max_count_, data_.dt);
    rebuild_kernels();
    sample_path();
    split();
  }

  const ParamState& state() const { return state_; }
  const std::vector<double>& covariate() const { return w_; }
  double last_log_likelihood() const { return forward_.log_likelihood(); }
  const MhAdapter& adapter() const { return adapter_; }

  void configure_adapter(const McmcSettings& mcmc) {
    adapter_ = MhAdapter{};
    adapter_.log_step = mcmc.initial_step > 0.0 ? std::log(mcmc.initial_step) : -INFINITY;
    adapter_.batch = mcmc.adapt_batch;
    adapter_.target_accept =
        spec_.model == TransitionModel::covariate ? mcmc.target_accept_covariate : mcmc.target_accept_rates;
  }

  void freeze_adapter() { adapter_.frozen = true; }

  // One full sweep; returns whether the MH step (if any) accepted.
  bool sweep(long iteration) {
    bool accepted = false;
    switch (spec_.model) {
      case TransitionModel::standard:
        state_.transitions = update_dirichlet_rows(state_.path, spec_.hyper.theta, rng_);
        accepted = true;
        break;
      case TransitionModel::penalized: {
        auto r = update_rates_mh(std::get<SwitchRates>(state_.transitions), state_.path, spec_.penalty, adapter_, rng_,
                                 data_.dt);
        state_.transitions = std::move(r.value);
        accepted = r.accepted;
        adapter_ = adapt(adapter_, accepted, iteration);
        break;
      }
      case TransitionModel::covariate: {
        auto r = update_covariate_params_mh(std::get<CovariateParams>(state_.transitions), state_.path, w_,
                                            spec_.penalty, spec_.hyper, adapter_, rng_, data_.dt,
                                            spec_.covariate.proposal_scales);
        state_.transitions = std::move(r.value);
        accepted = r.accepted;
        adapter_ = adapt(adapter_, accepted, iteration);
        break;
      }
    }
    rebuild_kernels();
    sample_path();
    split();
    state_.emission = update_emission_rates(state_.augmented_counts, state_.path, spec_.hyper, rng_, data_.dt);
    table_.rebuild(state_.emission, max_count_, data_.dt);
    return accepted;
  }

 private:
  void rebuild_kernels() {
    std::visit(
        [&](const auto& tr) {
          using T = std::decay_t<decltype(tr)>;
          if constexpr (std::is_same_v<T, ProbabilityRows>) {
            kernels_ = TransitionKernels(tr);
          } else if constexpr (std::is_same_v<T, SwitchRates>) {
            kernels_ = TransitionKernels(ptm_from_rates(tr, data_.dt));
          } else {
            response_.resize(w_.size());
            for (std::size_t t = 0; t < w_.size(); ++t) response_[t] = covariate_response(w_[t], tr.alpha);
            fill_covariate_kernels(tr, response_, data_.dt, kernels_);
          }
        },
        state_.transitions);
  }

  void sample_path() {
    forward_filter_into(data_.counts, table_, kernels_, spec_.hyper.pi0, forward_);
    backward_sample_into(forward_, kernels_, rng_, state_.path);
  }

  void split() {
    auto& aug = state_.augmented_counts;
    const int n = spec_.states;
    split_buf_.resize(n);
    for (std::size_t t : nonzero_) {
      split_counts_into(data_.counts[t], state_.path[t], state_.emission, rng_, split_buf_);
      for (int k = 0; k < n; ++k) aug(k, static_cast<Eigen::Index>(t)) = split_buf_[k];
    }
  }

  ModelSpec spec_;
  CountSeries data_;
  Rng rng_;
  std::vector<double> w_;
  std::vector<double> response_;
  int max_count_ = 0;
  std::vector<std::size_t> nonzero_;
  std::vector<int> split_buf_;
  ParamState state_;
  EmissionTable table_;
  TransitionKernels kernels_;
  ForwardMatrix forward_;
  MhAdapter adapter_;
};

// Runs one chain. Deterministic in (spec, data, mcmc, seed, stream).
inline PosteriorSample run_chain(const ModelSpec& spec, const CountSeries& data, const McmcSettings& mcmc,
                                 std::uint64_t seed, std::uint64_t stream = 0) {
  mcmc.validate();
  ChainRunner runner(spec, data, seed, stream);
  runner.configure_adapter(mcmc);

  PosteriorSample out;
  out.states = spec.states;
  out.model = spec.model;
  out.dt = data.dt;
  out.covariate = runner.covariate();
  const std::size_t T = data.size();
  const int n = spec.states;
  std::vector<long> occupancy(T * n, 0);
  double switches_sum = 0.0;
  long accepted_after = 0;

  for (long it = 1; it <= mcmc.iters; ++it) {
    if (it == mcmc.burn_in + 1) runner.freeze_adapter();
    const bool accepted = runner.sweep(it);
    if (it <= mcmc.burn_in) continue;

    const ParamState& s = runner.state();
    accepted_after += accepted ? 1 : 0;
    for (std::size_t t = 0; t < T; ++t) ++occupancy[t * n + s.path[t]];
    const std::size_t sw = count_switches(s.path);
    switches_sum += static_cast<double>(sw);

    if ((it - mcmc.burn_in) % mcmc.thin == 0) {
      ParamState kept{s.emission, s.transitions, s.path, {}};
      if (mcmc.keep_augmented) kept.augmented_counts = s.augmented_counts;
      out.draws.push_back(std::move(kept));
      out.info.push_back(DrawInfo{it, static_cast<int>(stream), runner.last_log_likelihood(), sw});
    }
  }

  const long kept_iters = mcmc.iters - mcmc.burn_in;
  out.post_burn_iterations = kept_iters;
  out.state_marginals.resize(static_cast<Eigen::Index>(T), n);
  for (std::size_t t = 0; t < T; ++t)
    for (int k = 0; k < n; ++k)
      out.state_marginals(static_cast<Eigen::Index>(t), k) =
          static_cast<double>(occupancy[t * n + k]) / static_cast<double>(kept_iters);
  out.mean_switches = switches_sum / static_cast<double>(kept_iters);
  out.accept_rate = spec.model == TransitionModel::standard
                        ? NAN
                        : static_cast<double>(accepted_after) / static_cast<double>(kept_iters);
  out.final_log_step = runner.adapter().log_step;
  finalize_summaries(out);
  return out;
}

// Pools independently seeded chains (stream k for chain k), run on up to
// `threads` workers. The result does not depend on the thread count.
inline PosteriorSample run_chains(const ModelSpec& spec, const CountSeries& data, const McmcSettings& mcmc,
                                  std::uint64_t seed, int chains, int threads = 1) {
  if (chains < 1) throw ConfigError("need at least one chain");
  std::vector<PosteriorSample> parts(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::mutex m;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int k;
      {
        std::lock_guard lock(m);
        if (next >= chains) return;
        k = next++;
      }
      try {
        parts[k] = run_chain(spec, data, mcmc, seed, static_cast<std::uint64_t>(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int nthreads = std::clamp(threads, 1, chains);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (chains == 1) return std::move(parts.front());

  PosteriorSample out = std::move(parts.front());
  double acc = out.accept_rate, sw = out.mean_switches;
  for (int k = 1; k < chains; ++k) {
    auto& p = parts[k];
    out.draws.insert(out.draws.end(), std::make_move_iterator(p.draws.begin()), std::make_move_iterator(p.draws.end()));
    out.info.insert(out.info.end(), p.info.begin(), p.info.end());
    out.state_marginals += p.state_marginals;
    acc += p.accept_rate;
    sw += p.mean_switches;
  }
  out.state_marginals /= static_cast<double>(chains);
  out.accept_rate = acc / chains;
  out.mean_switches = sw / chains;
  out.post_burn_iterations *= chains;
  finalize_summaries(out);
  return out;
}

}  // namespace phmm
