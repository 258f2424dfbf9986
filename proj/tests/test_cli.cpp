#include "commands.hpp"
#include "output.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace mmes::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmes_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MMES_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(FormatNumber, RoundTrips) {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 123456789.125}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(3.0), "3");
}

TEST(CsvTable, RejectsRaggedRows) {
  CsvTable t({"a", "b"});
  t.add_row({"1", "2"});
  EXPECT_THROW(t.add_row({"1"}), std::logic_error);
  EXPECT_EQ(t.str(), "a,b\n1,2\n");
}

TEST(OutputBundle, CommitWritesAllFiles) {
  const auto dir = scratch("bundle_ok");
  OutputBundle b;
  b.add("one.csv", "x\n1\n");
  b.add("two.csv", "y\n2\n");
  b.commit(dir);
  EXPECT_EQ(slurp(dir / "one.csv"), "x\n1\n");
  EXPECT_EQ(slurp(dir / "two.csv"), "y\n2\n");
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().filename().string()[0], '.');
  fs::remove_all(dir);
}

TEST(OutputBundle, FailureLeavesNothingBehind) {
  const auto dir = scratch("bundle_fail");
  fs::create_directories(dir / "blocked.csv");  // a directory where a file must go
  fs::create_directories(dir / "blocked.csv" / "keep");
  OutputBundle b;
  b.add("first.csv", "a\n");
  b.add("blocked.csv", "b\n");
  EXPECT_ANY_THROW(b.commit(dir));
  EXPECT_FALSE(fs::exists(dir / "first.csv"));
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "blocked.csv");
  fs::remove_all(dir);
}

TEST(RunOptions, Validation) {
  RunOptions o;
  EXPECT_NEAR(o.effective_tau(), M_PI / 20, 1e-15);
  EXPECT_NO_THROW(o.protocol_config());
  o.basis_order = "zz";
  EXPECT_THROW(o.protocol_config(), std::invalid_argument);
  o = RunOptions{};
  o.sign_model = "sometimes";
  EXPECT_THROW(o.protocol_config(), std::invalid_argument);
  o = RunOptions{};
  o.max_repeats = 0;
  EXPECT_THROW(o.protocol_config(), std::invalid_argument);
  o = RunOptions{};
  o.tau = -1.0;
  EXPECT_THROW(o.protocol_config(), std::invalid_argument);
}

TEST(Cli, SimulateIsByteIdenticalForFixedSeed) {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  const std::string flags = " --n-atoms 4 --max-repeats 5 --rounds 2 --trajectories 3000 --seed 17 ";
  ASSERT_EQ(run_cli("simulate" + flags + "--threads 1 --out-dir " + a.string()), 0);
  ASSERT_EQ(run_cli("simulate" + flags + "--threads 2 --out-dir " + b.string()), 0);
  for (const char* f : {"simulate_rounds.csv", "simulate_marginals.csv"}) {
    const auto text = slurp(a / f);
    EXPECT_FALSE(text.empty());
    EXPECT_EQ(text, slurp(b / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["config"]["seed"], 17);
  EXPECT_EQ(line_count(slurp(a / "simulate_rounds.csv")), 3u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, EnumerateWritesTables) {
  const auto dir = scratch("enum");
  ASSERT_EQ(run_cli("enumerate --n-atoms 3 --max-repeats 3 --rounds 2 --out-dir " + dir.string()), 0);
  const auto rounds = slurp(dir / "enumerate_rounds.csv");
  EXPECT_EQ(rounds.substr(0, rounds.find('\n')), "round,p_suc,f_avg,first_zero_both,converged_by,flagged_mass");
  EXPECT_EQ(line_count(rounds), 3u);
  // 2 rounds x 2 bases x 3 steps x 4 Delta values + header
  EXPECT_EQ(line_count(slurp(dir / "enumerate_marginals.csv")), 49u);
  fs::remove_all(dir);
}

TEST(Cli, TreeEngineMatchesEnsembleOutput) {
  const auto a = scratch("enum_ens");
  const auto b = scratch("enum_tree");
  const std::string flags = " --n-atoms 2 --max-repeats 2 --rounds 1 ";
  ASSERT_EQ(run_cli("enumerate" + flags + "--out-dir " + a.string()), 0);
  ASSERT_EQ(run_cli("enumerate" + flags + "--engine tree --prune 0 --out-dir " + b.string()), 0);
  std::istringstream x(slurp(a / "enumerate_steps.csv")), y(slurp(b / "enumerate_steps.csv"));
  std::string lx, ly;
  std::getline(x, lx);
  std::getline(y, ly);
  EXPECT_EQ(lx, ly);
  while (std::getline(x, lx) && std::getline(y, ly)) {
    std::istringstream cx(lx), cy(ly);
    std::string vx, vy;
    for (int col = 0; std::getline(cx, vx, ',') && std::getline(cy, vy, ','); ++col) {
      if (col < 3) EXPECT_EQ(vx, vy);
      else EXPECT_NEAR(std::stod(vx), std::stod(vy), 1e-12);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, NodeCapExitCode) {
  const auto dir = scratch("cap");
  EXPECT_EQ(run_cli("enumerate --engine tree --node-cap 4 --n-atoms 6 --out-dir " + dir.string()), 3);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_TRUE(manifest["node_cap_hit"].get<bool>());
  EXPECT_FALSE(fs::exists(dir / "enumerate_rounds.csv"));
  fs::remove_all(dir);
}

TEST(Cli, InvalidArgumentsExitTwo) {
  const auto dir = scratch("bad");
  EXPECT_EQ(run_cli("simulate --n-atoms 0 --out-dir " + dir.string()), 2);
  EXPECT_EQ(run_cli("simulate --sign-model sideways --out-dir " + dir.string()), 2);
  EXPECT_EQ(run_cli("simulate --no-such-flag"), 2);
  EXPECT_EQ(run_cli("enumerate --engine quantum --out-dir " + dir.string()), 2);
  EXPECT_EQ(run_cli("figures fig99 --out-dir " + dir.string()), 2);
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Cli, FigureBundle) {
  const auto dir = scratch("figs");
  ASSERT_EQ(run_cli("figures fig4 fig3c --n-atoms 6 --out-dir " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "fig4.csv"));
  EXPECT_TRUE(fs::exists(dir / "fig3c.csv"));
  const auto fig4 = slurp(dir / "fig4.csv");
  EXPECT_EQ(fig4.substr(0, fig4.find('\n')), "panel,grid_basis,k1,k2,probability");
  // 8 panels x 7 x 7 grid + header
  EXPECT_EQ(line_count(fig4), 8u * 49u + 1u);
  fs::remove_all(dir);
}
