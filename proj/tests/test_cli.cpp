#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "torsim/metrics.hpp"
#include "torsim/runner.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("torsim_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct Result {
  int code = -1;
  std::string out;
};

/// Runs the CLI with `args` from `cwd`, capturing stdout and stderr.
Result cli(const std::string& args, const fs::path& cwd, const std::string& env = "") {
  const fs::path log = cwd / "cli_output.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && " + env + (env.empty() ? "" : " ") + "'" + TORSIM_CLI_PATH +
                          "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, SimulateDefaultsSucceedsAndWritesArtifacts) {
  TempDir d;
  const Result r = cli("simulate --duration 200 --out run", d.path());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"simlog.csv", "metrics.csv", "meta.json", "gains.txt", "psd.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(d.path() / "run" / f)) << f;
  const auto meta = nlohmann::json::parse(slurp(d.path() / "run" / "meta.json"));
  EXPECT_EQ(meta.at("version"), torsim::kVersion);
  const auto manifest = nlohmann::json::parse(slurp(d.path() / "run" / "manifest.json"));
  EXPECT_EQ(manifest.at("exit_status"), 0);
  const auto rows = torsim::read_metrics_rows((d.path() / "run" / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].controller, "EOR");
  EXPECT_EQ(rows[0].v0, 18.0);
  const auto psd = torsim::CsvTable::read((d.path() / "run" / "psd.csv").string());
  EXPECT_EQ(psd.header.front(), "freq_hz");
  EXPECT_GT(psd.rows.size(), 10u);
}

TEST(Cli, UnknownControllerIsConfigError) {
  TempDir d;
  EXPECT_EQ(cli("simulate --controller Foo --duration 150 --out x", d.path()).code, 2);
  EXPECT_EQ(cli("simulate --set bogus=1 --duration 150 --out x", d.path()).code, 2);
  EXPECT_EQ(cli("simulate --not-a-flag", d.path()).code, 2);
  EXPECT_EQ(cli("", d.path()).code, 2);
}

TEST(Cli, UnreadableConfigIsIoError) {
  TempDir d;
  EXPECT_EQ(cli("simulate --config /nonexistent/torsim.cfg --out x", d.path()).code, 4);
}

TEST(Cli, SeedChangesLog) {
  TempDir d;
  ASSERT_EQ(cli("simulate --duration 150 --seed 1 --out a", d.path()).code, 0);
  ASSERT_EQ(cli("simulate --duration 150 --seed 2 --out b", d.path()).code, 0);
  ASSERT_EQ(cli("simulate --duration 150 --seed 1 --out c", d.path()).code, 0);
  const std::string a = slurp(d.path() / "a" / "simlog.csv");
  EXPECT_NE(std::hash<std::string>{}(a), std::hash<std::string>{}(slurp(d.path() / "b" / "simlog.csv")));
  EXPECT_EQ(a, slurp(d.path() / "c" / "simlog.csv"));
}

TEST(Cli, OutputRootPrecedence) {
  TempDir d;
  ASSERT_EQ(cli("simulate --duration 150", d.path()).code, 0);
  EXPECT_TRUE(fs::exists(d.path() / "torsim_out" / "simlog.csv"));
  ASSERT_EQ(cli("simulate --duration 150", d.path(), "TORSIM_OUT=from_env").code, 0);
  EXPECT_TRUE(fs::exists(d.path() / "from_env" / "simlog.csv"));
  ASSERT_EQ(cli("simulate --duration 150 --out from_flag", d.path(), "TORSIM_OUT=ignored").code, 0);
  EXPECT_TRUE(fs::exists(d.path() / "from_flag" / "simlog.csv"));
  EXPECT_FALSE(fs::exists(d.path() / "ignored"));
}

TEST(Cli, SweepCountsResumesAndCompares) {
  TempDir d;
  const std::string args = "sweep --v0 10,18 --controller Baseline,DAC,EOR --seed 1 --duration 150 --jobs 3 --out sw";
  const Result first = cli(args, d.path());
  ASSERT_EQ(first.code, 0) << first.out;
  const auto runs = torsim::read_metrics_rows((d.path() / "sw" / "runs.csv").string());
  EXPECT_EQ(runs.size(), 6u);
  const auto manifest = torsim::read_sweep_manifest((d.path() / "sw" / "manifest.csv").string());
  EXPECT_EQ(manifest.size(), 6u);
  for (const auto& [id, e] : manifest) EXPECT_EQ(e.status, "ok") << id;
  EXPECT_NE(first.out.find("6 executed, 0 skipped"), std::string::npos) << first.out;
  const std::string comparison = slurp(d.path() / "sw" / "comparison.csv");
  EXPECT_FALSE(comparison.empty());

  const Result again = cli(args, d.path());
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_NE(again.out.find("0 executed, 6 skipped"), std::string::npos) << again.out;
  EXPECT_EQ(slurp(d.path() / "sw" / "comparison.csv"), comparison);

  fs::remove_all(d.path() / "sw" / "runs" / torsim::run_id(torsim::ControllerKind::DAC, 18.0, 1));
  const Result partial = cli(args, d.path());
  ASSERT_EQ(partial.code, 0) << partial.out;
  EXPECT_NE(partial.out.find("1 executed, 5 skipped"), std::string::npos) << partial.out;

  // The compare subcommand reproduces the sweep's comparison table.
  const Result cmp = cli("compare sw/runs.csv --out cmp", d.path());
  ASSERT_EQ(cmp.code, 0) << cmp.out;
  EXPECT_EQ(slurp(d.path() / "cmp" / "comparison.csv"), comparison);
}

TEST(Cli, CompareIdenticalInputsGivesZeroPercent) {
  TempDir d;
  ASSERT_EQ(cli("simulate --duration 150 --controller Baseline --out bl", d.path()).code, 0);
  // Relabel the Baseline row as EOR and DAC with identical metrics.
  const auto rows = torsim::read_metrics_rows((d.path() / "bl" / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 1u);
  std::vector<torsim::MetricsRow> all = rows;
  for (const char* name : {"EOR", "DAC"}) {
    auto r = rows[0];
    r.controller = name;
    all.push_back(r);
  }
  torsim::write_metrics_rows((d.path() / "all.csv").string(), all);
  const Result cmp = cli("compare all.csv --out cmp", d.path());
  ASSERT_EQ(cmp.code, 0) << cmp.out;
  const auto table = torsim::CsvTable::read((d.path() / "cmp" / "comparison.csv").string());
  const int ctrl = table.column("controller");
  int percent_rows = 0;
  for (const auto& row : table.rows) {
    if (row[static_cast<std::size_t>(ctrl)].find("cf. BL %") == std::string::npos) continue;
    ++percent_rows;
    for (const auto& name : torsim::MetricsReport::field_names())
      EXPECT_EQ(std::stod(row[static_cast<std::size_t>(table.column(name))]), 0.0) << name;
  }
  EXPECT_EQ(percent_rows, 4);  // per-speed and lifetime rows for EOR and DAC
}

TEST(Cli, CompareWithoutBaselineFails) {
  TempDir d;
  ASSERT_EQ(cli("simulate --duration 150 --controller EOR --out eor", d.path()).code, 0);
  const Result r = cli("compare eor/metrics.csv", d.path());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_EQ(cli("compare missing.csv", d.path()).code, 4);
}

TEST(Cli, ConfigOverridesApply) {
  TempDir d;
  ASSERT_EQ(cli("simulate --duration 150 --set v0=9 --set controller=Baseline --out o", d.path()).code, 0);
  const auto rows = torsim::read_metrics_rows((d.path() / "o" / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].v0, 9.0);
  EXPECT_EQ(rows[0].controller, "Baseline");
  EXPECT_EQ(rows[0].region, "Region2");
  EXPECT_EQ(cli("simulate --set noequals --out o", d.path()).code, 2);
}
