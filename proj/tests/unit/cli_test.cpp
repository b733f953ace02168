#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "kinetic/htheorem.hpp"
#include "kinetic/serialize.hpp"

namespace fs = std::filesystem;
using namespace kinetic;
using kinetic::cli::CommandOptions;

namespace {

const fs::path kScenarios = KINETIC_SCENARIO_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("kinetic_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CommandOptions options(const std::string& sub) {
    CommandOptions o;
    o.out = dir_ / sub;
    o.log = &log_;
    return o;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  static nlohmann::json summary(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "summary.json")); }

  fs::path dir_;
  std::ostringstream log_;
};

int run_binary(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KINETIC_CLI_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string oracle_scenario(double dt, int particles) {
  nlohmann::json s = {{"name", "small-oracle"},
                      {"generator", {{"catalog", "ornstein-uhlenbeck"}}},
                      {"grid", {{"nodes", 81}}},
                      {"initial", {{"kind", "gaussian"}, {"mean", 1}, {"sd", 0.5}}},
                      {"times", {0, 1}},
                      {"oracle",
                       {{"particles", particles},
                        {"dt", dt},
                        {"seed", 77},
                        {"threads", 2},
                        {"snapshots", {1}},
                        {"budget", 1.0},
                        {"moment_points", {0, 1}},
                        {"moment_t", 0.5},
                        {"moment_particles", particles}}}};
  return s.dump(2);
}

}  // namespace

TEST_F(Cli, RunPassesOnTheAppendixExample) {
  EXPECT_EQ(cli::cmd_run(kScenarios / "appendix2a_alpha1.json", options("run")), 0) << log_.str();
  const auto s = summary(dir_ / "run");
  EXPECT_EQ(s["exit_code"], 0);
  EXPECT_TRUE(s["failed"].empty());
  EXPECT_TRUE(fs::exists(dir_ / "run" / "evolution.csv"));
  EXPECT_NE(log_.str().find("pass (exit 0)"), std::string::npos);
}

TEST_F(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(cli::cmd_run(kScenarios / "negative_diffusion.json", options("neg")), 2) << log_.str();
  EXPECT_EQ(summary(dir_ / "neg")["error"]["kind"], "NonEllipticCoefficient");
  EXPECT_EQ(cli::cmd_pawula(kScenarios / "pawula_empty.json", options("empty")), 2) << log_.str();
  EXPECT_EQ(cli::cmd_run(write("bad.json", "{\"name\": \"x\",\n  \"grid\": {"), options("bad")), 2);
  EXPECT_EQ(summary(dir_ / "bad")["error"]["kind"], "ParseError");
  EXPECT_EQ(cli::cmd_run(dir_ / "missing.json", options("missing")), 2);
}

TEST_F(Cli, MathematicalFailuresExitOne) {
  EXPECT_EQ(cli::cmd_run(kScenarios / "absorbing_invariant.json", options("abs")), 1) << log_.str();
  EXPECT_EQ(summary(dir_ / "abs")["error"]["kind"], "NoInvariantDensity");

  EXPECT_EQ(cli::cmd_pawula(kScenarios / "pawula_c3.json", options("c3")), 1) << log_.str();
  const auto cert = nlohmann::json::parse(slurp(dir_ / "c3" / "certificate.json"));
  EXPECT_NEAR(cert["value"].get<double>(), 0.4, 1e-12);

  EXPECT_EQ(cli::cmd_pawula(kScenarios / "pawula_appendix2a.json", options("p2a")), 0) << log_.str();
  EXPECT_FALSE(fs::exists(dir_ / "p2a" / "certificate.json"));
}

TEST_F(Cli, BinaryExitCodes) {
  EXPECT_EQ(run_binary("pawula " + (kScenarios / "pawula_c3.json").string() + " --out " + (dir_ / "b1").string(),
                       dir_ / "b1.log"),
            1);
  EXPECT_EQ(run_binary("run " + write("broken.json", "{ not json").string() + " --out " + (dir_ / "b2").string(),
                       dir_ / "b2.log"),
            2);
  EXPECT_NE(slurp(dir_ / "b2.log").find("line 1"), std::string::npos) << slurp(dir_ / "b2.log");
  EXPECT_EQ(run_binary("frobnicate x.json", dir_ / "b3.log"), 2);
  EXPECT_EQ(run_binary("pawula " + (kScenarios / "pawula_appendix2a.json").string() + " --out " +
                           (dir_ / "b4").string(),
                       dir_ / "b4.log"),
            0);
}

TEST_F(Cli, InvariantCsvMatchesTheSolver) {
  auto opt = options("inv");
  opt.grid_n = 201;
  EXPECT_EQ(cli::cmd_invariant(kScenarios / "appendix2a_alpha1.json", opt), 0) << log_.str();
  std::ifstream f(dir_ / "inv" / "invariant.csv");
  const CsvTable t = read_csv(f);
  ASSERT_EQ(t.header, (std::vector<std::string>{"node_index", "x", "pi", "analytic"}));
  const auto ex = catalog_example("appendix2a", 1.0);
  const auto pi = solve_invariant(build_qmatrix(ex.spec, ex.spec.domain.make_grid(201))).pi;
  ASSERT_EQ(t.rows.size(), pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    EXPECT_EQ(t.rows[i][1], pi.grid.x(i));
    EXPECT_EQ(t.rows[i][2], pi[i]);
  }
}

TEST_F(Cli, DissipationGapIsChecked) {
  EXPECT_EQ(cli::cmd_hcurve(kScenarios / "ou_dissipation.json", options("ou")), 0) << log_.str();
  bool found = false;
  const auto doc0 = summary(dir_ / "ou");
  for (const auto& c : doc0["checks"]) {
    if (c["name"].get<std::string>().rfind("dissipation_gap", 0) == 0) {
      found = true;
      EXPECT_LE(c["value"].get<double>(), 0.02);
    }
  }
  EXPECT_TRUE(found);

  auto doc = nlohmann::json::parse(slurp(kScenarios / "ou_dissipation.json"));
  doc["tolerances"]["dissipation_gap"] = 1e-8;
  EXPECT_EQ(cli::cmd_hcurve(write("tight.json", doc.dump()), options("tight")), 1) << log_.str();
  EXPECT_FALSE(summary(dir_ / "tight")["failed"].empty());
}

TEST_F(Cli, OracleRunsAreReproducible) {
  const fs::path s = write("oracle.json", oracle_scenario(1e-2, 2000));
  EXPECT_EQ(cli::cmd_oracle_compare(s, options("o1")), 0) << log_.str();
  EXPECT_EQ(cli::cmd_oracle_compare(s, options("o2")), 0) << log_.str();
  EXPECT_EQ(slurp(dir_ / "o1" / "summary.json"), slurp(dir_ / "o2" / "summary.json"));
  EXPECT_EQ(slurp(dir_ / "o1" / "oracle_density.csv"), slurp(dir_ / "o2" / "oracle_density.csv"));
  EXPECT_EQ(slurp(dir_ / "o1" / "moments.csv"), slurp(dir_ / "o2" / "moments.csv"));

  auto seeded = options("o3");
  seeded.seed = 78;
  EXPECT_EQ(cli::cmd_oracle_compare(s, seeded), 0);
  EXPECT_NE(slurp(dir_ / "o1" / "oracle_density.csv"), slurp(dir_ / "o3" / "oracle_density.csv"));
}

TEST_F(Cli, CoarseParticleStepWarns) {
  EXPECT_EQ(cli::cmd_oracle_compare(write("coarse.json", oracle_scenario(0.5, 1000)), options("c")), 0) << log_.str();
  const auto warnings = summary(dir_ / "c")["warnings"];
  ASSERT_FALSE(warnings.empty());
  EXPECT_EQ(warnings[0]["kind"], "MomentBiasWarning");
  EXPECT_NE(log_.str().find("[warn] MomentBiasWarning"), std::string::npos);
}

TEST_F(Cli, OrnsteinUhlenbeckOracle) {
  EXPECT_EQ(cli::cmd_oracle_compare(kScenarios / "ou_oracle.json", options("ou")), 0) << log_.str();
  std::ifstream f(dir_ / "ou" / "moments.csv");
  const CsvTable t = read_csv(f);
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& row : t.rows) {
    EXPECT_NEAR(row[3], row[1], 4 * row[4] + 0.02);  // b_particle
    EXPECT_NEAR(row[5], row[2], 4 * row[6] + 0.02);  // a_particle
  }
}
