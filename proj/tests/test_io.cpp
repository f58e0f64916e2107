#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phmm/run.hpp"

using namespace phmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phmm_io_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(PHMM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Strict reader: header, equal field counts, every non-header field a plain
// decimal number unless its column is listed as text.
std::vector<std::vector<std::string>> strict_csv(const fs::path& p, const std::set<std::string>& text_columns = {}) {
  std::istringstream in(read_file(p));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    EXPECT_FALSE(line.empty()) << p;
    EXPECT_EQ(line.find('\r'), std::string::npos);
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (header.empty()) {
      header = f;
      continue;
    }
    EXPECT_EQ(f.size(), header.size()) << p << ": " << line;
    for (std::size_t i = 0; i < f.size() && i < header.size(); ++i) {
      if (text_columns.count(header[i])) continue;
      EXPECT_TRUE(f[i] == "nan" || parse_number(f[i]).has_value()) << p << ": '" << f[i] << "'";
      EXPECT_EQ(f[i].find(' '), std::string::npos);
    }
    rows.push_back(f);
  }
  EXPECT_FALSE(header.empty()) << p;
  rows.insert(rows.begin(), header);
  return rows;
}

json simulate_config(const fs::path& dir, std::size_t T = 3000) {
  return json{{"mode", "simulate"},
              {"data", {{"T", T}, {"simulate", {{"lambda", {0.0057, 0.0501}}, {"gamma", {{0, 0.00142}, {0.00422, 0}}},
                                                {"entrance_rate", 1.0 / 600}}}}},
              {"mcmc", {{"seed", 5}}},
              {"output", {{"dir", dir.string()}}}};
}

json fit_config(const fs::path& data_dir, const fs::path& out, std::size_t T, const std::string& type) {
  return json{{"mode", "fit"},
              {"data", {{"events", (data_dir / "events.csv").string()},
                        {"entrances", (data_dir / "entrances.csv").string()},
                        {"T", T}}},
              {"model", {{"type", type}}},
              {"mcmc", {{"iters", 300}, {"burn_in", 150}, {"thin", 5}, {"seed", 3}}},
              {"output", {{"dir", out.string()}}}};
}

}  // namespace

TEST(Ingest, EmptyFileGivesZeros) {
  const auto d = scratch("empty");
  write(d / "e.csv", "start_s\n");
  const auto s = ingest_events(d / "e.csv", 10);
  EXPECT_EQ(s.counts, std::vector<int>(10, 0));
}

TEST(Ingest, DirectBinning) {
  const auto d = scratch("bin");
  write(d / "e.csv", "start_s\n2\n2\n5\n");
  EXPECT_EQ(ingest_events(d / "e.csv", 5).counts, (std::vector<int>{0, 2, 0, 0, 1}));
  write(d / "f.csv", "start_s\r\n1.5\r\n\r\n2.0\r\n");
  EXPECT_EQ(ingest_events(d / "f.csv", 3).counts, (std::vector<int>{0, 2, 0}));
  write(d / "w.csv", "start_s\n1\n4\n");
  write(d / "x.csv", "entry_s\n4\n1\n4\n");
  const auto s = ingest_events(d / "w.csv", 4, 1.0, d / "x.csv");
  EXPECT_EQ(s.entrance_times, (std::vector<int>{1, 4}));
  // two-second bins
  EXPECT_EQ(ingest_events(d / "w.csv", 2, 2.0).counts, (std::vector<int>{1, 1}));
}

TEST(Ingest, Errors) {
  const auto d = scratch("err");
  write(d / "bad.csv", "start_s\n1\n2,5\n");
  try {
    ingest_events(d / "bad.csv", 10);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
  }
  write(d / "nohdr.csv", "1\n2\n");
  EXPECT_THROW(ingest_events(d / "nohdr.csv", 10), ParseError);
  write(d / "late.csv", "start_s\n11\n");
  EXPECT_THROW(ingest_events(d / "late.csv", 10), OutOfRange);
  write(d / "early.csv", "start_s\n0.5\n");
  EXPECT_THROW(ingest_events(d / "early.csv", 10), OutOfRange);
  write(d / "loc.csv", "start_s\n1,5\n");
  EXPECT_THROW(ingest_events(d / "loc.csv", 10), ParseError);
  EXPECT_THROW(ingest_events(d / "missing.csv", 10), IoError);
}

TEST(Ingest, SimulatorRoundTrip) {
  const auto d = scratch("roundtrip");
  const auto sim = simulate_series(EmissionParams::from_totals({0.0057, 0.0501}),
                                   TransitionKernels(ptm_from_rates(SwitchRates{Matrix::Constant(2, 2, 0.002)}, 1.0)),
                                   Vector::Constant(2, 0.5), 14400, 91);
  write(d / "e.csv", events_csv(sim.data));
  const auto back = ingest_events(d / "e.csv", 14400);
  EXPECT_EQ(back.counts, sim.data.counts);
  long total = 0;
  for (int c : back.counts) total += c;
  long truth = 0;
  for (int c : sim.data.counts) truth += c;
  EXPECT_EQ(total, truth);
  EXPECT_GT(total, 100);
}

TEST(Numbers, FormatAndParse) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1234567.0), "1234567");
  EXPECT_EQ(parse_number(format_number(0.1 + 0.2)).value(), 0.1 + 0.2);
  EXPECT_FALSE(parse_number("1,5").has_value());
  EXPECT_FALSE(parse_number("1 000").has_value());
  EXPECT_FALSE(parse_number("").has_value());
  EXPECT_FALSE(parse_number("inf").has_value());
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(json{{"colour", 1}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"model", {{"stats", 2}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"mcmc", {{"iterations", 10}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"penalty", {{"tau", 1.0}, {"log_tau", 0.0}}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"mode", "predict"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"mcmc", {{"iters", 10}, {"burn_in", 10}}}}), ConfigError);
}

TEST(Config, DefaultsAndRoundTrip) {
  const RunConfig c = parse_config(json::object());
  EXPECT_EQ(c.spec.states, 2);
  EXPECT_EQ(c.spec.model, TransitionModel::penalized);
  EXPECT_DOUBLE_EQ(c.spec.penalty.tau, std::exp(-6.0));
  EXPECT_EQ(c.spec.hyper.theta(0, 0), 120000.0);
  EXPECT_EQ(c.mcmc.iters, 50000);
  EXPECT_EQ(c.mcmc.burn_in, 25000);
  EXPECT_EQ(c.T, 14400u);

  const json custom = {{"mode", "sweep"},
                       {"model", {{"states", 3}, {"type", "covariate"}, {"init", {{"alpha", 0.5}}}}},
                       {"penalty", {{"family", "lasso"}, {"log_tau", -3.0}, {"grid_log_tau", {-4, -2}}}},
                       {"covariate", {{"transform", "inverse"}, {"beta_prior", {{"var", 50.0}}}}},
                       {"mcmc", {{"iters", 100}, {"chains", 2}}},
                       {"data", {{"events", "ev.csv"}}}};
  const RunConfig d = parse_config(custom, "/base");
  EXPECT_EQ(d.events, "/base/ev.csv");
  EXPECT_EQ(d.mcmc.burn_in, 50);
  EXPECT_EQ(d.spec.hyper.beta_var, 50.0);
  EXPECT_EQ(d.spec.hyper.pi0.size(), 3);
  const json echo = config_to_json(d);
  EXPECT_EQ(config_to_json(parse_config(echo)), echo);
  EXPECT_EQ(config_to_json(parse_config(config_to_json(c))), config_to_json(c));
}

TEST(ParamStateJson, RoundTrip) {
  ParamState s{EmissionParams::from_totals({0.01, 0.05}), SwitchRates::uniform(2, 0.003), {0, 1, 1}, {}};
  const auto back = param_state_from_json(to_json(s));
  EXPECT_EQ(back.path, s.path);
  EXPECT_EQ(std::get<SwitchRates>(back.transitions).gamma, std::get<SwitchRates>(s.transitions).gamma);
}

TEST(Cli, SimulateIsByteIdentical) {
  const auto d = scratch("sim");
  write(d / "sim.json", simulate_config(d / "a").dump());
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string()), 0);
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string() + " --out " + (d / "b").string()), 0);
  for (const char* f : {"events.csv", "entrances.csv", "true_path.csv", "truth.json"})
    EXPECT_EQ(read_file(d / "a" / f), read_file(d / "b" / f)) << f;
  const json manifest = json::parse(read_file(d / "a" / "run_manifest.json"));
  for (const char* key : {"version", "mode", "seed", "config", "wall_seconds", "compiler", "eigen"})
    EXPECT_TRUE(manifest.contains(key)) << key;
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string() + " --seed 6 --out " + (d / "c").string()), 0);
  EXPECT_NE(read_file(d / "a" / "events.csv"), read_file(d / "c" / "events.csv"));
  strict_csv(d / "a" / "events.csv");
  strict_csv(d / "a" / "true_path.csv");
}

TEST(Cli, FitEmitsSchemaAndStrictCsv) {
  const auto d = scratch("fit");
  write(d / "sim.json", simulate_config(d / "data").dump());
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string()), 0);

  for (const std::string type : {"standard", "penalized", "covariate"}) {
    const fs::path out = d / type;
    write(d / (type + ".json"), fit_config(d / "data", out, 3000, type).dump());
    ASSERT_EQ(cli("fit --config " + (d / (type + ".json")).string()), 0) << type;
    const json s = json::parse(read_file(out / "summary.json"));
    const auto& p = s.at("parameters");
    const std::string rate = type == "standard" ? "p_" : "gamma_";
    for (const std::string& key : std::vector<std::string>{"lambda_L", "lambda_H_total", rate + "LH", rate + "HL"}) {
      EXPECT_TRUE(p.contains(key)) << type << " " << key;
      if (p.contains(key))
        for (const char* f : {"mean", "lower", "upper"}) EXPECT_TRUE(p.at(key).contains(f));
    }
    if (type == "covariate")
      for (const char* key : {"mu_LH", "mu_HL", "beta_LH", "beta_HL", "alpha"}) EXPECT_TRUE(p.contains(key)) << key;
    for (const char* key : {"P_hat", "delta_hat", "switches", "mspe"}) EXPECT_TRUE(s.contains(key)) << key;
    EXPECT_EQ(s.at("P_hat").size(), 2u);

    const auto probs = strict_csv(out / "state_probs.csv");
    ASSERT_EQ(probs.size(), 3001u);
    for (std::size_t r = 1; r < probs.size(); ++r)
      EXPECT_NEAR(*parse_number(probs[r][1]) + *parse_number(probs[r][2]), 1.0, 1e-9);
    const auto draws = strict_csv(out / "draws.csv");
    EXPECT_EQ(draws.size(), 31u);
    strict_csv(out / "path_mean.csv", {"label"});
  }
}

TEST(Cli, ManifestEchoReproducesRun) {
  const auto d = scratch("manifest");
  write(d / "sim.json", simulate_config(d / "data", 2000).dump());
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string()), 0);
  write(d / "fit.json", fit_config(d / "data", d / "first", 2000, "penalized").dump());
  ASSERT_EQ(cli("fit --config " + (d / "fit.json").string()), 0);
  const json manifest = json::parse(read_file(d / "first" / "run_manifest.json"));
  write(d / "echo.json", manifest.at("config").dump(2));
  ASSERT_EQ(cli("fit --config " + (d / "echo.json").string() + " --out " + (d / "second").string()), 0);
  for (const char* f : {"draws.csv", "state_probs.csv", "path_mean.csv", "summary.json"})
    EXPECT_EQ(read_file(d / "first" / f), read_file(d / "second" / f)) << f;
}

TEST(Cli, SweepMatchesSelectionTable) {
  const auto d = scratch("sweep");
  write(d / "sim.json", simulate_config(d / "data", 2000).dump());
  ASSERT_EQ(cli("simulate --config " + (d / "sim.json").string()), 0);
  json cfg = fit_config(d / "data", d / "out", 2000, "penalized");
  cfg["mode"] = "sweep";
  cfg["penalty"] = {{"grid_log_tau", {-9, -6, -3, 0}}};
  write(d / "sweep.json", cfg.dump());
  ASSERT_EQ(cli("sweep --config " + (d / "sweep.json").string()), 0);
  const auto table = strict_csv(d / "out" / "sweep.csv", {"error"});
  ASSERT_EQ(table.size(), 5u);

  const RunConfig c = load_config(d / "sweep.json");
  const CountSeries data = load_data(c);
  std::vector<double> grid;
  for (double lt : c.grid_log_tau) grid.push_back(std::exp(lt));
  const auto rows = tau_sweep(c.spec, data, c.mcmc, grid, c.chains, c.seed);
  EXPECT_EQ(read_file(d / "out" / "sweep.csv"), sweep_csv(rows));
  int flagged = 0;
  for (std::size_t r = 1; r < table.size(); ++r) flagged += table[r][6] == "1";
  EXPECT_EQ(flagged, 1);
}

TEST(Cli, ExitCodes) {
  const auto d = scratch("codes");
  write(d / "bad.json", R"({"mode": "fit", "modle": {}})");
  EXPECT_EQ(cli("fit --config " + (d / "bad.json").string()), 2);
  write(d / "broken.json", "{ not json");
  EXPECT_EQ(cli("fit --config " + (d / "broken.json").string()), 2);
  EXPECT_EQ(cli("fit"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  write(d / "nodata.json", json{{"data", {{"events", (d / "absent.csv").string()}, {"T", 10}}}}.dump());
  EXPECT_EQ(cli("fit --config " + (d / "nodata.json").string()), 3);
  write(d / "ev.csv", "start_s\n50\n");
  write(d / "range.json", json{{"data", {{"events", (d / "ev.csv").string()}, {"T", 10}}}}.dump());
  EXPECT_EQ(cli("fit --config " + (d / "range.json").string()), 3);
  EXPECT_EQ(cli("oracle-check --seed 3"), 0);
}
