#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "codesign/harness.hpp"
#include "support.hpp"

using namespace codesign;
using namespace codesign::harness;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(CODESIGN_SOURCE_DIR) / "configs";

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("codesign_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string config_error(const std::string& text) {
  try {
    parse_ini(text, "t.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const std::string kChip = R"(kind = cphase-chip
[chip]
e_c_h = 0.3
e_j_h = 21.5
e_c_m = 0.28
e_j_m = 16.5
e_c_l = 0.24
e_j_l = 14.5
hm_coupling = 0.2381
ml_coupling = 0.297543
)";

}  // namespace

TEST(Config, ShippedFilesLoad) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    EXPECT_NO_THROW(load_config(entry.path()).validate()) << entry.path();
  }
  const auto cfg = load_config(kConfigs / "iswap_normal.ini");
  EXPECT_EQ(cfg.kind, ExperimentKind::Iswap);
  EXPECT_EQ(cfg.iswap.q1.e_c, 1.492);
  EXPECT_EQ(cfg.iswap.j_c, 0.139);
  EXPECT_EQ(cfg.iswap.control.phi_p, 0.245);
  EXPECT_EQ(cfg.optimizer.steps, 0);
  EXPECT_EQ(load_config(kConfigs / "demo.json").kind, ExperimentKind::Demo);
}

TEST(Config, ErrorsNameTheirLocation) {
  const std::string unknown_key = config_error("kind = iswap\n[device]\ne_q = 1\n");
  EXPECT_NE(unknown_key.find("t.ini"), std::string::npos) << unknown_key;
  EXPECT_NE(unknown_key.find("e_q"), std::string::npos) << unknown_key;

  EXPECT_NE(config_error("kind = iswap\n[devise]\nj_c = 0.1\n").find("[devise]"), std::string::npos);
  EXPECT_NE(config_error("kind = iswap\n[device]\nj_c = 0.1\nj_c = 0.2\n").find("line 4"), std::string::npos);
  EXPECT_NE(config_error("[device]\nj_c = 0.1\n").find("kind"), std::string::npos);
  EXPECT_NE(config_error("kind = iswap\n[device]\nthis line has no equals sign\n").find("line 3"),
            std::string::npos);
  EXPECT_NE(config_error(kChip.substr(0, kChip.find("hm_coupling"))).find("[chip] hm_coupling"), std::string::npos);
  EXPECT_FALSE(config_error("kind = iswap\n[device]\nj_c = abc\n").empty());
  EXPECT_THROW(parse_kind("iswap-fast"), ValidationError);
}

TEST(Config, JsonRoundTrip) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    const auto cfg = load_config(entry.path());
    const Json once = to_json(cfg);
    const Json twice = to_json(parse_json(once.dump(), "round-trip"));
    EXPECT_EQ(once, twice) << entry.path();
  }
}

TEST(Config, JsonErrorsAreConfigErrors) {
  EXPECT_THROW(parse_json("{\"kind\": \"iswap\", \"device\": {\"e_q\": 1}}"), ConfigError);
  EXPECT_THROW(parse_json("{\"kind\": \"iswap\""), ConfigError);
  EXPECT_THROW(parse_json("{\"kind\": \"iswap\", \"device\": {\"j_c\": \"x\"}}"), ConfigError);
}

TEST(Run, ZeroStepsEvaluatesOnceAndWritesSchema) {
  const auto out = scratch("zero_steps");
  const auto cfg = load_config(kConfigs / "iswap_normal.ini");
  const auto rec = run(cfg, out);
  ASSERT_EQ(rec.status, RunStatus::Ok) << rec.error;
  EXPECT_EQ(rec.exit_code(), 0);

  const auto rows = lines(rec.trace_path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rfind("step,loss,lr,", 0), 0u) << rows[0];
  EXPECT_EQ(rows[1].rfind("0,", 0), 0u);

  const Json doc = Json::parse(slurp(rec.result_path));
  for (const char* key : {"config", "status", "eigh_backend", "trace", "final_params", "final_objective", "results"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["status"], "ok");
  ASSERT_TRUE(rec.final_report.has_value());
  EXPECT_NEAR(rec.final_report->value, objectives::iswap_objective(testing_support::iswap_normal(), {}, false).value,
              1e-12);

  // The result file reproduces the run's configuration.
  const auto again = parse_json(slurp(rec.result_path), "result.json");
  EXPECT_EQ(to_json(again), to_json(cfg));
  fs::remove_all(out);
}

TEST(Run, RuntimeFailureKeepsResultFile) {
  const auto out = scratch("failure");
  // H starts below M, so lowering H never reaches the crossing.
  auto cfg = parse_ini(kChip, "chip");
  cfg.chip.high.e_j = 5.0;
  cfg.optimizer.steps = 1;
  const auto rec = run(cfg, out);
  EXPECT_EQ(rec.status, RunStatus::Failed);
  EXPECT_EQ(rec.exit_code(), 1);
  EXPECT_FALSE(rec.error.empty());
  const Json doc = Json::parse(slurp(rec.result_path));
  EXPECT_EQ(doc["status"], "failed");
  EXPECT_EQ(doc["error"], rec.error);
  fs::remove_all(out);
}

TEST(Run, DemoTrace) {
  const auto out = scratch("demo");
  const auto rec = run(load_config(kConfigs / "demo.json"), out);
  ASSERT_EQ(rec.status, RunStatus::Ok) << rec.error;
  const auto rows = lines(rec.trace_path);
  EXPECT_EQ(rows[0], "solve,alternating_value");
  EXPECT_EQ(rows.size(), 61u);
  EXPECT_LT(rec.results["simultaneous_value"].get<double>() * 100.0, rec.results["alternating_value"].get<double>());
  fs::remove_all(out);
}

TEST(Run, ScanTrace) {
  const auto out = scratch("scan");
  auto cfg = load_config(kConfigs / "iswap_normal.ini");
  cfg.kind = ExperimentKind::Scan;
  cfg.scan_min = -0.002;
  cfg.scan_max = 0.002;
  cfg.scan_points = 3;
  const auto rec = run(cfg, out);
  ASSERT_EQ(rec.status, RunStatus::Ok) << rec.error;
  const auto rows = lines(rec.trace_path);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "delta_phi_p,objective,ok,error");
  fs::remove_all(out);
}

TEST(Chain, UncoupledGroundStateIsSumOfSites) {
  ChainConfig cfg;
  cfg.j_c = 0.0;
  auto p = ChainParams::uniform(cfg);
  p.sites[1] = {1.40, 2.10, 0.60};
  const circuits::PhaseGrid grid;
  const auto r = chain_ground_energy(p, 5, grid, true);
  auto site_e0 = [&](const circuits::FluxoniumParams& s) {
    return testing_support::oracle_fluxonium_levels(s, circuits::kPi, grid.phi_min, grid.phi_max, grid.n_basis)(0);
  };
  double expected = 0.0;
  for (const auto& s : p.sites) expected += site_e0(s);
  EXPECT_NEAR(r.ground_energy, expected, 1e-9);

  // Without coupling each site energy derivative is that of its own ground level.
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.sites.size(); ++i) {
    const std::string site = "site" + std::to_string(i);
    auto up = p.sites[i];
    auto dn = p.sites[i];
    up.e_j += h;
    dn.e_j -= h;
    EXPECT_NEAR(r.gradient[site + ".e_j"], (site_e0(up) - site_e0(dn)) / (2 * h), 1e-7);
    up = dn = p.sites[i];
    up.e_l += h;
    dn.e_l -= h;
    EXPECT_NEAR(r.gradient[site + ".e_l"], (site_e0(up) - site_e0(dn)) / (2 * h), 1e-7);
  }
  // <0|n|0> vanishes at the sweet spot.
  EXPECT_LT(std::abs(r.gradient["bond0.j_c"]), 1e-8);
  EXPECT_LT(std::abs(r.gradient["bond1.j_c"]), 1e-8);
}

TEST(Chain, GradientMatchesFiniteDifferences) {
  ChainConfig cfg;
  const auto p = ChainParams::uniform(cfg);
  const circuits::PhaseGrid grid;
  const auto r = chain_ground_energy(p, 4, grid, true);
  const auto v = p.to_vector();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double h = 1e-4 * std::max(1.0, std::abs(v.value(k)));
    auto up = v;
    auto dn = v;
    up.value(k) += h;
    dn.value(k) -= h;
    const double fd = (chain_ground_energy(ChainParams::from_vector(up, 3), 4, grid, false).ground_energy -
                       chain_ground_energy(ChainParams::from_vector(dn, 3), 4, grid, false).ground_energy) /
                      (2 * h);
    EXPECT_NEAR(r.gradient.values(static_cast<Eigen::Index>(k)), fd, 1e-6 * std::max(1.0, std::abs(fd))) << v.names()[k];
  }
}

TEST(Chain, ValidatesSize) {
  ChainConfig cfg;
  cfg.n_fm = 7;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.n_fm = 6;
  EXPECT_EQ(cfg.effective_levels(), 4);
}

#ifdef CODESIGN_CLI
namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(CODESIGN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodesAndResultReuse) {
  const auto out = scratch("cli");
  const auto bad = out / "bad.ini";
  fs::create_directories(out);
  std::ofstream(bad) << "kind = iswap\n[device]\ne_q = 1\n";
  EXPECT_EQ(cli("run " + bad.string() + " --out " + (out / "a").string()), 2);

  const auto good = (kConfigs / "iswap_normal.ini").string();
  ASSERT_EQ(cli("run " + good + " --out " + (out / "a").string()), 0);
  // A result file is itself a config.
  ASSERT_EQ(cli("run " + (out / "a" / "result.json").string() + " --out " + (out / "b").string()), 0);
  const Json a = Json::parse(slurp(out / "a" / "result.json"));
  const Json b = Json::parse(slurp(out / "b" / "result.json"));
  EXPECT_EQ(a["config"], b["config"]);
  EXPECT_EQ(a["final_objective"], b["final_objective"]);

  EXPECT_EQ(cli("demo appendix-a --seed 3 --out " + (out / "d").string()), 0);
  EXPECT_EQ(cli("scan " + good + " --delta-range 1:2 --out " + (out / "s").string()), 2);
  fs::remove_all(out);
}
#endif
