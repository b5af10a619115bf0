#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "torsim/torsim.hpp"

namespace {

using namespace torsim;

struct CommonOptions {
  std::string config = TORSIM_DEFAULT_CONFIG;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

std::string output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TORSIM_OUT"); env && *env) return env;
  return "torsim_out";
}

KeyValueConfig load_with_overrides(const CommonOptions& opt) {
  KeyValueConfig cfg = KeyValueConfig::load(opt.config);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(kv, "override must be key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "Flat key = value configuration file")->capture_default_str();
  cmd->add_option("--out", opt.out, "Output directory (overrides TORSIM_OUT)");
  cmd->add_option("--set", opt.overrides, "Override a configuration key, key=value");
}

int cmd_simulate(const CommonOptions& opt, const std::optional<std::string>& controller,
                 const std::optional<double>& v0, const std::optional<std::int64_t>& seed,
                 const std::optional<double>& duration) {
  KeyValueConfig cfg = load_with_overrides(opt);
  if (controller) cfg.set("controller", *controller);
  if (v0) cfg.set("v0", format_number(*v0));
  if (seed) cfg.set("seed", std::to_string(*seed));
  if (duration) cfg.set("duration", format_number(*duration));
  const LoadedConfig lc = load_run_config(cfg);
  const std::string dir = output_root(opt.out);
  const RunOutcome r = simulate_to(lc.sim, lc.metrics, dir, opt.config, lc.echo);
  std::cout << "run " << run_id(lc.sim.controller, lc.sim.v0, lc.sim.seed) << " (" << r.row.region << ") -> " << dir
            << "\n";
  const auto names = MetricsReport::field_names();
  const auto vals = r.row.report.values();
  for (std::size_t i = 0; i < names.size(); ++i) std::cout << "  " << names[i] << " = " << vals[i] << "\n";
  if (r.meta.truncated) std::cout << "  note: " << r.meta.note << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& opt, const std::vector<double>& speeds, const std::vector<std::string>& controllers,
              const std::vector<std::int64_t>& seeds, const std::optional<double>& duration, int jobs) {
  KeyValueConfig cfg = load_with_overrides(opt);
  if (duration) cfg.set("duration", format_number(*duration));
  LoadedConfig lc = load_run_config(cfg);
  SweepSpec spec = lc.sweep;
  if (!speeds.empty()) spec.speeds = speeds;
  if (!controllers.empty()) {
    spec.controllers.clear();
    for (const auto& c : controllers) spec.controllers.push_back(parse_controller(c));
  }
  if (!seeds.empty()) {
    spec.seeds.clear();
    for (auto s : seeds) {
      if (s < 0) throw ConfigError("seed", "must be non-negative");
      spec.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  spec.jobs = jobs;
  const std::string root = output_root(opt.out);
  const SweepOutcome r = sweep(lc.sim, lc.metrics, spec, root, opt.config, lc.echo, &std::cout);
  std::cout << "sweep: " << r.executed << " executed, " << r.skipped << " skipped, manifest "
            << (std::filesystem::path(root) / "manifest.csv").string() << "\n";
  if (r.first_failure_code) {
    std::cerr << "error: some runs failed; see the manifest\n";
    return r.first_failure_code;
  }
  if (r.table) std::cout << "comparison -> " << (std::filesystem::path(root) / "comparison.csv").string() << "\n";
  return 0;
}

int cmd_compare(const CommonOptions& opt, const std::vector<std::string>& files) {
  KeyValueConfig cfg = load_with_overrides(opt);
  const LoadedConfig lc = load_run_config(cfg);
  std::vector<MetricsRow> rows;
  for (const auto& f : files) {
    auto r = read_metrics_rows(f);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const ComparisonTable table = compare_runs(rows, lc.metrics.weibull);
  table.write(std::cout);
  if (!opt.out.empty() || std::getenv("TORSIM_OUT")) {
    const std::string root = output_root(opt.out);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("cannot create '" + root + "': " + ec.message());
    const std::string path = (std::filesystem::path(root) / "comparison.csv").string();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path + "'");
    table.write(f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torsim: LIDAR-assisted wind-turbine control simulation"};
  app.require_subcommand(1);

  CommonOptions sim_opt, sweep_opt, cmp_opt;
  std::optional<std::string> controller;
  std::optional<double> v0, sim_duration, sweep_duration;
  std::optional<std::int64_t> seed;
  std::vector<double> speeds;
  std::vector<std::string> controllers;
  std::vector<std::int64_t> seeds;
  int jobs = 1;
  std::vector<std::string> files;

  auto* sim = app.add_subcommand("simulate", "Run one simulation and write its artifacts");
  add_common(sim, sim_opt);
  sim->add_option("--controller", controller, "Baseline, DAC or EOR");
  sim->add_option("--v0", v0, "Mean wind speed, m/s");
  sim->add_option("--seed", seed, "Turbulence seed");
  sim->add_option("--duration", sim_duration, "Simulated time including warm-up, s");

  auto* sw = app.add_subcommand("sweep", "Run a speed x controller x seed sweep and compare");
  add_common(sw, sweep_opt);
  sw->add_option("--v0", speeds, "Mean wind speeds (comma separated)")->delimiter(',');
  sw->add_option("--controller", controllers, "Controllers (comma separated)")->delimiter(',');
  sw->add_option("--seed", seeds, "Seeds (comma separated)")->delimiter(',');
  sw->add_option("--duration", sweep_duration, "Simulated time per run including warm-up, s");
  sw->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber)->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "Percent-vs-Baseline table from metrics CSV files");
  add_common(cmp, cmp_opt);
  cmp->add_option("files", files, "Metrics CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(sim_opt, controller, v0, seed, sim_duration);
    if (*sw) return cmd_sweep(sweep_opt, speeds, controllers, seeds, sweep_duration, jobs);
    if (*cmp) return cmd_compare(cmp_opt, files);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
