#pragma once

// Event-file ingestion, run configuration, serialization, and output files.

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "phmm/chain.hpp"
#include "phmm/core.hpp"
#include "phmm/model.hpp"
#include "phmm/posterior.hpp"
#include "phmm/selection.hpp"

namespace phmm {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// number formatting

// Shortest round-trip representation, '.' decimal separator, no grouping.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// files

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reads a one-column file with the given header into values (seconds).
inline std::vector<double> read_time_column(const std::filesystem::path& path, const std::string& header) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<double> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!have_header) {
      const auto b = line.find_first_not_of(" \t");
      const auto e = line.find_last_not_of(" \t");
      if (line.substr(b, e - b + 1) != header)
        throw ParseError(path.string(), lineno, "expected header '" + header + "'");
      have_header = true;
      continue;
    }
    const auto v = parse_number(line);
    if (!v) throw ParseError(path.string(), lineno, "not a number: '" + line + "'");
    out.push_back(*v);
  }
  if (!have_header) throw ParseError(path.string(), lineno + 1, "missing header '" + header + "'");
  return out;
}

// Bin (t-1) dt < s <= t dt, 1-based.
inline int time_to_bin(double s, double dt) {
  return std::max(1, static_cast<int>(std::ceil(s / dt - 1e-9)));
}

// Bins event start times into T per-bin counts; optional entrance file
// provides entrance_times.
inline CountSeries ingest_events(const std::filesystem::path& events, std::size_t T, double dt = 1.0,
                                 const std::optional<std::filesystem::path>& entrances = std::nullopt) {
  if (T < 1) throw ConfigError("T must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  CountSeries series;
  series.dt = dt;
  series.counts.assign(T, 0);
  const double horizon = static_cast<double>(T) * dt;
  for (double s : read_time_column(events, "start_s")) {
    if (s < 1.0 || s > horizon + 1e-9)
      throw OutOfRange("event at " + format_number(s) + " s outside [1, " + format_number(horizon) + "]");
    ++series.counts[time_to_bin(s, dt) - 1];
  }
  if (entrances) {
    std::set<int> bins;
    for (double s : read_time_column(*entrances, "entry_s")) {
      if (s < 1.0 || s > horizon + 1e-9)
        throw OutOfRange("entrance at " + format_number(s) + " s outside [1, " + format_number(horizon) + "]");
      bins.insert(time_to_bin(s, dt));
    }
    series.entrance_times.assign(bins.begin(), bins.end());
  }
  return series;
}

inline std::string events_csv(const CountSeries& data) {
  std::string out = "start_s\n";
  for (std::size_t t = 0; t < data.size(); ++t)
    for (int c = 0; c < data.counts[t]; ++c) out += format_number(static_cast<double>(t + 1) * data.dt) + "\n";
  return out;
}

inline std::string entrances_csv(const CountSeries& data) {
  std::string out = "entry_s\n";
  for (int e : data.entrance_times) out += format_number(static_cast<double>(e) * data.dt) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = j.at(static_cast<std::size_t>(i));
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) throw ConfigError(what + ": ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!r.at(static_cast<std::size_t>(k)).is_number()) throw ConfigError(what + ": non-numeric entry");
      m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ---------------------------------------------------------------------------
// ParamState serialization

inline json to_json(const ParamState& s) {
  json j;
  j["lambda_base"] = s.emission.lambda_base;
  j["lambda_incr"] = s.emission.lambda_incr;
  std::visit(
      [&](const auto& tr) {
        using T = std::decay_t<decltype(tr)>;
        if constexpr (std::is_same_v<T, ProbabilityRows>) {
          j["transitions"] = {{"kind", "probability_rows"}, {"p", matrix_to_json(tr.p)}};
        } else if constexpr (std::is_same_v<T, SwitchRates>) {
          j["transitions"] = {{"kind", "switch_rates"}, {"gamma", matrix_to_json(tr.gamma)}};
        } else {
          j["transitions"] = {{"kind", "covariate"},
                              {"mu", matrix_to_json(tr.mu)},
                              {"beta", matrix_to_json(tr.beta)},
                              {"alpha", tr.alpha}};
        }
      },
      s.transitions);
  j["path"] = std::vector<int>(s.path.begin(), s.path.end());
  json aug = json::array();
  for (Eigen::Index k = 0; k < s.augmented_counts.rows(); ++k) {
    std::vector<int> row(static_cast<std::size_t>(s.augmented_counts.cols()));
    for (Eigen::Index t = 0; t < s.augmented_counts.cols(); ++t) row[static_cast<std::size_t>(t)] = s.augmented_counts(k, t);
    aug.push_back(std::move(row));
  }
  j["augmented_counts"] = std::move(aug);
  return j;
}

inline ParamState param_state_from_json(const json& j) {
  ParamState s;
  s.emission.lambda_base = j.at("lambda_base").get<double>();
  s.emission.lambda_incr = j.at("lambda_incr").get<std::vector<double>>();
  const json& tr = j.at("transitions");
  const std::string kind = tr.at("kind").get<std::string>();
  if (kind == "probability_rows") {
    s.transitions = ProbabilityRows{matrix_from_json(tr.at("p"), "p")};
  } else if (kind == "switch_rates") {
    s.transitions = SwitchRates{matrix_from_json(tr.at("gamma"), "gamma")};
  } else if (kind == "covariate") {
    s.transitions = CovariateParams{matrix_from_json(tr.at("mu"), "mu"), matrix_from_json(tr.at("beta"), "beta"),
                                    tr.at("alpha").get<double>()};
  } else {
    throw ConfigError("unknown transition kind " + kind);
  }
  for (int x : j.at("path").get<std::vector<int>>()) {
    if (x < 0 || x > 255) throw DataError("path state out of range");
    s.path.push_back(static_cast<std::uint8_t>(x));
  }
  const json& aug = j.at("augmented_counts");
  if (!aug.empty()) {
    const auto rows = static_cast<Eigen::Index>(aug.size());
    const auto cols = static_cast<Eigen::Index>(aug.at(0).size());
    s.augmented_counts.resize(rows, cols);
    for (Eigen::Index k = 0; k < rows; ++k) {
      const auto row = aug.at(static_cast<std::size_t>(k)).get<std::vector<int>>();
      if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("ragged augmented counts");
      for (Eigen::Index t = 0; t < cols; ++t) s.augmented_counts(k, t) = row[static_cast<std::size_t>(t)];
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// run configuration

enum class RunMode { fit, sweep, simulate };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::fit:
      return "fit";
    case RunMode::sweep:
      return "sweep";
    case RunMode::simulate:
      return "simulate";
  }
  return "?";
}

// Generating values for `simulate`.
struct SimulationConfig {
  std::size_t T = 14400;
  std::vector<double> lambda_totals{0.0057, 0.0501};
  std::optional<Matrix> p;      // standard kernel
  std::optional<Matrix> gamma;  // rate kernel
  std::optional<CovariateParams> covariate;
  double entrance_rate = 0.0;   // per second; 0 = no entrances
};

struct RunConfig {
  RunMode mode = RunMode::fit;
  // data
  std::string events;
  std::string entrances;
  std::size_t T = 14400;
  double dt = 1.0;
  std::optional<SimulationConfig> simulate;
  // model
  ModelSpec spec;
  std::vector<double> grid_log_tau{-9.0, -6.0, -3.0, 0.0};
  // mcmc
  McmcSettings mcmc;
  std::uint64_t seed = 1;
  int chains = 1;
  int threads = 1;
  // output
  std::string out_dir = "out";
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal().string();
}

inline Matrix offdiag_matrix_from(const json& j, int n, const std::string& what) {
  if (j.is_number()) {
    Matrix m = Matrix::Constant(n, n, j.get<double>());
    m.diagonal().setZero();
    return m;
  }
  Matrix m = matrix_from_json(j, what);
  if (m.rows() != n || m.cols() != n) throw ConfigError(what + " must be " + std::to_string(n) + " x " + std::to_string(n));
  m.diagonal().setZero();
  return m;
}

}  // namespace detail

inline RunConfig parse_config(const json& root, const std::filesystem::path& base_dir = {}) {
  using detail::read_opt;
  detail::reject_unknown(root, {"mode", "data", "model", "penalty", "covariate", "mcmc", "output"}, "config");
  RunConfig c;

  if (root.contains("mode")) {
    const auto m = root.at("mode").get<std::string>();
    if (m == "fit") c.mode = RunMode::fit;
    else if (m == "sweep") c.mode = RunMode::sweep;
    else if (m == "simulate") c.mode = RunMode::simulate;
    else throw ConfigError("unknown mode '" + m + "'");
  }

  // model first: the state count shapes the defaults of everything else
  int n = 2;
  TransitionModel model = TransitionModel::penalized;
  const json model_j = root.value("model", json::object());
  detail::reject_unknown(model_j, {"states", "type", "a", "b", "incr_shape", "incr_rate", "theta", "pi0", "init"}, "model");
  read_opt(model_j, "states", n);
  if (n < 2 || n > 255) throw ConfigError("model.states must be in [2, 255]");
  if (model_j.contains("type")) {
    const auto t = model_j.at("type").get<std::string>();
    if (t == "standard") model = TransitionModel::standard;
    else if (t == "penalized") model = TransitionModel::penalized;
    else if (t == "covariate") model = TransitionModel::covariate;
    else throw ConfigError("unknown model.type '" + t + "'");
  }
  c.spec = ModelSpec::defaults(n, model);
  Hyperparams& h = c.spec.hyper;
  read_opt(model_j, "a", h.a);
  read_opt(model_j, "b", h.b);
  read_opt(model_j, "incr_shape", h.incr_shape);
  read_opt(model_j, "incr_rate", h.incr_rate);
  if (model_j.contains("theta")) h.theta = matrix_from_json(model_j.at("theta"), "model.theta");
  if (model_j.contains("pi0")) {
    const auto v = model_j.at("pi0").get<std::vector<double>>();
    h.pi0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (model_j.contains("init")) {
    const json& ij = model_j.at("init");
    detail::reject_unknown(ij, {"lambda", "p", "gamma", "mu", "beta", "alpha"}, "model.init");
    read_opt(ij, "lambda", c.spec.init.lambda_totals);
    if (ij.contains("p")) c.spec.init.p = matrix_from_json(ij.at("p"), "model.init.p");
    read_opt(ij, "gamma", c.spec.init.gamma);
    read_opt(ij, "mu", c.spec.init.mu);
    read_opt(ij, "beta", c.spec.init.beta);
    read_opt(ij, "alpha", c.spec.init.alpha);
  }

  const json pen = root.value("penalty", json::object());
  detail::reject_unknown(pen, {"family", "tau", "log_tau", "grid_log_tau"}, "penalty");
  if (pen.contains("family")) {
    const auto f = pen.at("family").get<std::string>();
    if (f == "none") c.spec.penalty.family = PenaltyFamily::none;
    else if (f == "ridge") c.spec.penalty.family = PenaltyFamily::ridge;
    else if (f == "lasso") c.spec.penalty.family = PenaltyFamily::lasso;
    else throw ConfigError("unknown penalty.family '" + f + "'");
  }
  if (pen.contains("tau") && pen.contains("log_tau")) throw ConfigError("give penalty.tau or penalty.log_tau, not both");
  read_opt(pen, "tau", c.spec.penalty.tau);
  if (pen.contains("log_tau")) c.spec.penalty.tau = std::exp(pen.at("log_tau").get<double>());
  read_opt(pen, "grid_log_tau", c.grid_log_tau);

  const json cov = root.value("covariate", json::object());
  detail::reject_unknown(cov, {"transform", "initial_offset", "proposal_scales", "beta_prior", "alpha_prior"},
                         "covariate");
  if (cov.contains("transform")) {
    const auto t = cov.at("transform").get<std::string>();
    if (t == "elapsed") c.spec.covariate.transform = CovariateTransform::elapsed;
    else if (t == "inverse") c.spec.covariate.transform = CovariateTransform::inverse;
    else throw ConfigError("unknown covariate.transform '" + t + "'");
  }
  read_opt(cov, "initial_offset", c.spec.covariate.initial_offset);
  read_opt(cov, "proposal_scales", c.spec.covariate.proposal_scales);
  for (const char* key : {"beta_prior", "alpha_prior"}) {
    if (!cov.contains(key)) continue;
    const json& pj = cov.at(key);
    detail::reject_unknown(pj, {"mean", "var"}, std::string("covariate.") + key);
    double& mean = std::string(key) == "beta_prior" ? h.beta_mean : h.alpha_mean;
    double& var = std::string(key) == "beta_prior" ? h.beta_var : h.alpha_var;
    read_opt(pj, "mean", mean);
    read_opt(pj, "var", var);
  }

  const json mc = root.value("mcmc", json::object());
  detail::reject_unknown(mc,
                         {"iters", "burn_in", "thin", "seed", "chains", "threads", "target_accept_rates",
                          "target_accept_covariate", "adapt_batch", "initial_step", "keep_augmented"},
                         "mcmc");
  read_opt(mc, "iters", c.mcmc.iters);
  c.mcmc.burn_in = c.mcmc.iters / 2;
  read_opt(mc, "burn_in", c.mcmc.burn_in);
  read_opt(mc, "thin", c.mcmc.thin);
  read_opt(mc, "seed", c.seed);
  read_opt(mc, "chains", c.chains);
  read_opt(mc, "threads", c.threads);
  read_opt(mc, "target_accept_rates", c.mcmc.target_accept_rates);
  read_opt(mc, "target_accept_covariate", c.mcmc.target_accept_covariate);
  read_opt(mc, "adapt_batch", c.mcmc.adapt_batch);
  read_opt(mc, "initial_step", c.mcmc.initial_step);
  read_opt(mc, "keep_augmented", c.mcmc.keep_augmented);

  const json data = root.value("data", json::object());
  detail::reject_unknown(data, {"events", "entrances", "T", "dt", "simulate"}, "data");
  read_opt(data, "events", c.events);
  read_opt(data, "entrances", c.entrances);
  c.events = detail::resolve(c.events, base_dir);
  c.entrances = detail::resolve(c.entrances, base_dir);
  read_opt(data, "T", c.T);
  read_opt(data, "dt", c.dt);
  if (data.contains("simulate")) {
    const json& sj = data.at("simulate");
    detail::reject_unknown(sj, {"T", "lambda", "p", "gamma", "mu", "beta", "alpha", "entrance_rate"}, "data.simulate");
    SimulationConfig sim;
    sim.T = c.T;
    sim.lambda_totals = c.spec.init.lambda_totals;
    read_opt(sj, "T", sim.T);
    read_opt(sj, "lambda", sim.lambda_totals);
    read_opt(sj, "entrance_rate", sim.entrance_rate);
    const int kinds = sj.contains("p") + sj.contains("gamma") + (sj.contains("mu") || sj.contains("beta"));
    if (kinds != 1) throw ConfigError("data.simulate needs exactly one of p, gamma or mu/beta/alpha");
    if (sj.contains("p")) sim.p = matrix_from_json(sj.at("p"), "data.simulate.p");
    if (sj.contains("gamma")) sim.gamma = detail::offdiag_matrix_from(sj.at("gamma"), n, "data.simulate.gamma");
    if (sj.contains("mu") || sj.contains("beta")) {
      CovariateParams cp{detail::offdiag_matrix_from(sj.value("mu", json(std::log(0.003))), n, "data.simulate.mu"),
                         detail::offdiag_matrix_from(sj.value("beta", json(0.0)), n, "data.simulate.beta"),
                         sj.value("alpha", 1.0)};
      sim.covariate = cp;
    } else if (sj.contains("alpha")) {
      throw ConfigError("data.simulate.alpha needs mu/beta");
    }
    c.simulate = sim;
  }

  const json out = root.value("output", json::object());
  detail::reject_unknown(out, {"dir"}, "output");
  read_opt(out, "dir", c.out_dir);
  c.out_dir = detail::resolve(c.out_dir, base_dir);

  c.spec.validate();
  if (c.mode != RunMode::simulate) c.mcmc.validate();
  if (c.chains < 1 || c.threads < 1) throw ConfigError("chains and threads must be >= 1");
  if (!(c.dt > 0.0)) throw ConfigError("data.dt must be positive");
  if (c.grid_log_tau.empty()) throw ConfigError("penalty.grid_log_tau must be non-empty");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Fully resolved configuration; parse_config(config_to_json(c)) == c.
inline json config_to_json(const RunConfig& c) {
  const ModelSpec& s = c.spec;
  json j;
  j["mode"] = to_string(c.mode);
  json data = {{"T", c.T}, {"dt", c.dt}};
  if (!c.events.empty()) data["events"] = c.events;
  if (!c.entrances.empty()) data["entrances"] = c.entrances;
  if (c.simulate) {
    const auto& sim = *c.simulate;
    json sj = {{"T", sim.T}, {"lambda", sim.lambda_totals}, {"entrance_rate", sim.entrance_rate}};
    if (sim.p) sj["p"] = matrix_to_json(*sim.p);
    if (sim.gamma) sj["gamma"] = matrix_to_json(*sim.gamma);
    if (sim.covariate) {
      sj["mu"] = matrix_to_json(sim.covariate->mu);
      sj["beta"] = matrix_to_json(sim.covariate->beta);
      sj["alpha"] = sim.covariate->alpha;
    }
    data["simulate"] = std::move(sj);
  }
  j["data"] = std::move(data);
  j["model"] = {{"states", s.states},
                {"type", to_string(s.model)},
                {"a", s.hyper.a},
                {"b", s.hyper.b},
                {"incr_shape", s.hyper.incr_shape},
                {"incr_rate", s.hyper.incr_rate},
                {"theta", matrix_to_json(s.hyper.theta)},
                {"pi0", vector_to_json(s.hyper.pi0)},
                {"init",
                 {{"lambda", s.init.lambda_totals},
                  {"p", matrix_to_json(s.init.p)},
                  {"gamma", s.init.gamma},
                  {"mu", s.init.mu},
                  {"beta", s.init.beta},
                  {"alpha", s.init.alpha}}}};
  j["penalty"] = {{"family", to_string(s.penalty.family)}, {"tau", s.penalty.tau}, {"grid_log_tau", c.grid_log_tau}};
  j["covariate"] = {{"transform", to_string(s.covariate.transform)},
                    {"initial_offset", s.covariate.initial_offset},
                    {"proposal_scales", s.covariate.proposal_scales},
                    {"beta_prior", {{"mean", s.hyper.beta_mean}, {"var", s.hyper.beta_var}}},
                    {"alpha_prior", {{"mean", s.hyper.alpha_mean}, {"var", s.hyper.alpha_var}}}};
  j["mcmc"] = {{"iters", c.mcmc.iters},
               {"burn_in", c.mcmc.burn_in},
               {"thin", c.mcmc.thin},
               {"seed", c.seed},
               {"chains", c.chains},
               {"threads", c.threads},
               {"target_accept_rates", c.mcmc.target_accept_rates},
               {"target_accept_covariate", c.mcmc.target_accept_covariate},
               {"adapt_batch", c.mcmc.adapt_batch},
               {"initial_step", c.mcmc.initial_step},
               {"keep_augmented", c.mcmc.keep_augmented}};
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

// ---------------------------------------------------------------------------
// outputs

inline std::string draws_csv(const PosteriorSample& sample) {
  std::string out = "iteration,chain,log_likelihood";
  for (const auto& n : sample.names) out += "," + n;
  out += "\n";
  for (std::size_t d = 0; d < sample.draws.size(); ++d) {
    const DrawInfo& info = sample.info[d];
    out += std::to_string(info.iteration) + "," + std::to_string(info.chain) + "," + format_number(info.log_likelihood);
    for (Eigen::Index k = 0; k < sample.values.cols(); ++k)
      out += "," + format_number(sample.values(static_cast<Eigen::Index>(d), k));
    out += "\n";
  }
  return out;
}

inline std::string state_probs_csv(const PosteriorSample& sample) {
  std::string out = "t";
  for (int k = 0; k < sample.states; ++k) out += ",p_" + state_label(k, sample.states);
  out += "\n";
  for (Eigen::Index t = 0; t < sample.state_marginals.rows(); ++t) {
    out += std::to_string(t + 1);
    for (int k = 0; k < sample.states; ++k) out += "," + format_number(sample.state_marginals(t, k));
    out += "\n";
  }
  return out;
}

inline std::string path_mean_csv(const PosteriorSample& sample) {
  std::string out = "t,state,label,prob\n";
  const auto modal = modal_path(sample);
  for (std::size_t t = 0; t < modal.size(); ++t) {
    const int k = modal[t];
    out += std::to_string(t + 1) + "," + std::to_string(k + 1) + "," + state_label(k, sample.states) + "," +
           format_number(sample.state_marginals(static_cast<Eigen::Index>(t), k)) + "\n";
  }
  return out;
}

inline json summary_json(const PosteriorSample& sample, const CountSeries& data) {
  json j;
  j["model"] = to_string(sample.model);
  j["states"] = sample.states;
  j["draws"] = sample.draws.size();
  j["post_burn_iterations"] = sample.post_burn_iterations;
  json params = json::object();
  for (std::size_t k = 0; k < sample.names.size(); ++k) {
    const Summary& s = sample.summaries[k];
    params[sample.names[k]] = {{"mean", s.mean}, {"sd", s.sd}, {"lower", s.lower}, {"upper", s.upper}, {"ess", s.ess}};
  }
  j["parameters"] = std::move(params);
  const ProbabilityRows phat = posterior_mean_ptm(sample);
  j["P_hat"] = matrix_to_json(phat.p);
  try {
    j["delta_hat"] = vector_to_json(stationary_distribution(phat));
  } catch (const Error&) {
    j["delta_hat"] = nullptr;
  }
  const Summary& sw = sample.summary("switches");
  j["switches"] = {{"mean", sample.mean_switches}, {"mean_retained", sw.mean}, {"lower", sw.lower}, {"upper", sw.upper}};
  const MspeResult e = mspe_detail(sample, data);
  j["mspe"] = e.squared;
  j["mspe_signed"] = e.signed_error;
  j["accept_rate"] = std::isnan(sample.accept_rate) ? json(nullptr) : json(sample.accept_rate);
  return j;
}

inline void emit_outputs(const PosteriorSample& sample, const CountSeries& data, const std::filesystem::path& dir) {
  if (sample.draws.empty()) throw Error("emit_outputs: empty posterior sample");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "draws.csv", draws_csv(sample));
  write_file_atomic(dir / "state_probs.csv", state_probs_csv(sample));
  write_file_atomic(dir / "path_mean.csv", path_mean_csv(sample));
  write_file_atomic(dir / "summary.json", summary_json(sample, data).dump(2) + "\n");
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau,log_tau,mspe,mean_switches,accept_rate,mspe_signed,argmin,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    out += format_number(r.tau) + "," + format_number(r.log_tau()) + "," + format_number(r.mspe) + "," +
           format_number(r.mean_switches) + "," + format_number(r.accept_rate) + "," + format_number(r.mspe_signed) +
           "," + (r.argmin ? "1" : "0") + "," + err + "\n";
  }
  return out;
}

}  // namespace phmm
