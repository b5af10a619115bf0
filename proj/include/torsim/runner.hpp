#pragma once

#include <algorithm>
#include <charconv>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "torsim/config.hpp"
#include "torsim/errors.hpp"
#include "torsim/metrics.hpp"
#include "torsim/sim.hpp"

namespace torsim {

inline constexpr const char* kVersion = "0.1.0";

/// One metrics row: run identity plus its report.
struct MetricsRow {
  std::string controller;
  double v0 = 0.0;
  std::uint64_t seed = 0;
  std::string region;
  MetricsReport report;
};

inline const std::vector<std::string>& metrics_row_keys() {
  static const std::vector<std::string> k{"controller", "v0", "seed", "region"};
  return k;
}

inline void write_metrics_rows(std::ostream& out, const std::vector<MetricsRow>& rows) {
  write_metrics_header(out, metrics_row_keys());
  for (const auto& r : rows)
    write_metrics_row(out, {r.controller, format_number(r.v0), std::to_string(r.seed), r.region}, r.report);
}

inline void write_metrics_rows(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  write_metrics_rows(f, rows);
  if (!f) throw IoError("write failed for '" + path + "'");
}

inline double parse_cell(const std::string& cell, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw IoError("CSV '" + path + "': bad number '" + cell + "'");
  }
}

inline std::vector<MetricsRow> read_metrics_rows(const std::string& path) {
  const CsvTable t = CsvTable::read(path);
  const int c_ctrl = t.column("controller"), c_v0 = t.column("v0"), c_seed = t.column("seed"),
            c_region = t.column("region");
  std::vector<int> cols;
  for (const auto& n : MetricsReport::field_names()) cols.push_back(t.column(n));
  std::vector<MetricsRow> rows;
  for (const auto& r : t.rows) {
    MetricsRow m;
    m.controller = to_string(parse_controller(r[c_ctrl]));
    m.v0 = parse_cell(r[c_v0], path);
    const double s = parse_cell(r[c_seed], path);
    if (s < 0 || s != std::floor(s)) throw IoError("CSV '" + path + "': bad seed '" + r[c_seed] + "'");
    m.seed = static_cast<std::uint64_t>(s);
    m.region = r[c_region];
    std::vector<double> v;
    for (int c : cols) v.push_back(parse_cell(r[c], path));
    m.report = MetricsReport::from_values(v);
    rows.push_back(std::move(m));
  }
  return rows;
}

// --- single run -------------------------------------------------------------

struct RunManifest {
  std::string config_path;
  std::string out_dir;
  std::map<std::string, std::string> artifacts;  // role -> path
  int exit_status = 0;
  double wall_clock = 0.0;  // s

  nlohmann::json to_json() const {
    return {{"config", config_path}, {"out_dir", out_dir}, {"artifacts", artifacts},
            {"exit_status", exit_status}, {"wall_clock_s", wall_clock}};
  }
};

inline std::string run_id(ControllerKind c, double v0, std::uint64_t seed) {
  return std::string(to_string(c)) + "_v" + format_number(v0) + "_s" + std::to_string(seed);
}

/// Welch segment used for a post-warm-up record: the configured length, or a
/// shorter one leaving room for two overlapping segments.
inline double psd_segment_for(double record_s, const MetricsConfig& mc) {
  return std::min(mc.psd_segment, record_s / 1.5);
}

inline void write_psd_csv(const std::string& path, const SimLog& log, double warmup, const MetricsConfig& mc,
                          double* segment_used = nullptr) {
  const std::vector<int> channels{SimLog::kWind, SimLog::kRotorSpeed, SimLog::kPitch, SimLog::kGenTorque,
                                  SimLog::kPower, SimLog::kShaftTorque, SimLog::kTowerMoment, SimLog::kBladeMoment};
  const double fs = 1.0 / (log.dt() * mc.psd_decimation);
  std::vector<Spectrum> specs;
  double seg = 0.0;
  for (int ch : channels) {
    const auto x = decimate(window_after(log, ch, warmup), mc.psd_decimation);
    seg = psd_segment_for(static_cast<double>(x.size()) / fs, mc);
    specs.push_back(psd_welch(x, fs, seg));
  }
  if (segment_used) *segment_used = seg;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << "freq_hz";
  for (int ch : channels) f << "," << SimLog::names()[static_cast<std::size_t>(ch)];
  f << "\n" << std::setprecision(17);
  for (std::size_t k = 0; k < specs[0].freq.size(); ++k) {
    f << specs[0].freq[k];
    for (const auto& s : specs) f << "," << s.density[k];
    f << "\n";
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

struct RunOutcome {
  RunManifest manifest;
  MetricsRow row;
  SimMeta meta;
};

inline nlohmann::json meta_json(const SimConfig& cfg, const SimMeta& m, const std::map<std::string, std::string>& echo,
                                double psd_segment, double wall) {
  return {{"version", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"config", echo},
          {"controller", to_string(cfg.controller)},
          {"v0", cfg.v0},
          {"seed", cfg.seed},
          {"region", to_string(m.region)},
          {"anchor_wind", m.anchor_wind},
          {"mean_wind", m.mean_wind},
          {"end_time", m.end_time},
          {"truncated", m.truncated},
          {"stalled", m.stalled},
          {"note", m.note},
          {"saturation",
           {{"torque", m.saturation.torque},
            {"torque_rate", m.saturation.torque_rate},
            {"pitch", m.saturation.pitch},
            {"pitch_rate", m.saturation.pitch_rate}}},
          {"controller_faults", m.controller_faults},
          {"apparent_wind_clamps", m.apparent_wind_clamps},
          {"wind_sample_clamps", m.wind_sample_clamps},
          {"rls_resets", m.rls_resets},
          {"regulator_refreshes", m.regulator_refreshes},
          {"regulator_infeasible", m.regulator_infeasible},
          {"regulator_failures", m.regulator_failures},
          {"feedback_spectral_radius", m.feedback_radius},
          {"observer_spectral_radius", m.observer_radius},
          {"max_regulator_residual_dyn", m.max_residual_dyn},
          {"max_regulator_residual_out", m.max_residual_out},
          {"psd_segment_s", psd_segment},
          {"wall_clock_s", wall}};
}

/// Runs one simulation and writes simlog.csv, metrics.csv, meta.json,
/// gains.txt, psd.csv and manifest.json into `dir`.
inline RunOutcome simulate_to(const SimConfig& cfg, const MetricsConfig& mc, const std::string& dir,
                              const std::string& config_path, const std::map<std::string, std::string>& echo) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());

  const SimResult res = run(cfg);
  if (!res.log.all_finite()) throw SynthesisError("non-finite values in simulation log");

  RunOutcome out;
  out.meta = res.meta;
  out.row = {to_string(cfg.controller), cfg.v0, cfg.seed, to_string(res.meta.region),
             compute_metrics(res.log, cfg.warmup, cfg.Ts_ctrl, cfg.turbine, mc)};

  auto& a = out.manifest.artifacts;
  a["simlog"] = (fs::path(dir) / "simlog.csv").string();
  a["metrics"] = (fs::path(dir) / "metrics.csv").string();
  a["meta"] = (fs::path(dir) / "meta.json").string();
  a["gains"] = (fs::path(dir) / "gains.txt").string();
  a["psd"] = (fs::path(dir) / "psd.csv").string();

  res.log.write_csv(a["simlog"]);
  write_metrics_rows(a["metrics"], {out.row});
  double seg = 0.0;
  write_psd_csv(a["psd"], res.log, cfg.warmup, mc, &seg);
  {
    std::ofstream f(a["gains"]);
    if (!f) throw IoError("cannot write '" + a["gains"] + "'");
    res.gains.write(f);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream f(a["meta"]);
    if (!f) throw IoError("cannot write '" + a["meta"] + "'");
    f << meta_json(cfg, res.meta, echo, seg, wall).dump(2) << "\n";
  }
  out.manifest.config_path = config_path;
  out.manifest.out_dir = dir;
  out.manifest.wall_clock = wall;
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  std::ofstream f(mpath);
  if (!f) throw IoError("cannot write '" + mpath + "'");
  f << out.manifest.to_json().dump(2) << "\n";
  return out;
}

// --- comparison -------------------------------------------------------------

struct ComparisonRow {
  std::string scope;  // "v0" or "lifetime"
  std::string v0;     // speed, or "all"
  std::string region;
  std::string controller;  // controller name or "<X> cf. BL %"
  std::vector<double> values;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  const ComparisonRow& find(const std::string& scope, const std::string& v0, const std::string& controller) const {
    for (const auto& r : rows)
      if (r.scope == scope && r.v0 == v0 && r.controller == controller) return r;
    throw DomainError("comparison row not found: " + scope + "/" + v0 + "/" + controller);
  }

  void write(std::ostream& out) const {
    write_metrics_header(out, {"scope", "v0", "region", "controller"});
    for (const auto& r : rows)
      write_metrics_row(out, {r.scope, r.v0, r.region, r.controller}, MetricsReport::from_values(r.values));
  }
};

inline std::string percent_label(const std::string& controller) { return controller + " cf. BL %"; }

/// Seed means per (speed, controller), Weibull-weighted lifetime means per
/// controller, and percent-vs-Baseline rows for both. Every controller must
/// cover exactly the Baseline's (speed, seed) set.
inline ComparisonTable compare_runs(const std::vector<MetricsRow>& rows, const WeibullSpec& weibull) {
  const std::string bl = to_string(ControllerKind::Baseline);
  std::map<std::string, std::map<std::pair<double, std::uint64_t>, const MetricsRow*>> by_ctrl;
  for (const auto& r : rows) {
    auto& slot = by_ctrl[r.controller][{r.v0, r.seed}];
    if (slot) throw ConfigError("compare", "duplicate run " + r.controller + " v0=" + format_number(r.v0) +
                                               " seed=" + std::to_string(r.seed));
    slot = &r;
  }
  if (!by_ctrl.count(bl)) throw ConfigError("compare", "no Baseline runs to compare against");
  std::set<std::pair<double, std::uint64_t>> keys;
  for (const auto& [k, _] : by_ctrl.at(bl)) keys.insert(k);
  for (const auto& [ctrl, runs] : by_ctrl) {
    std::set<std::pair<double, std::uint64_t>> mine;
    for (const auto& [k, _] : runs) mine.insert(k);
    if (mine != keys) throw ConfigError("compare", ctrl + " runs do not match the Baseline speeds/seeds");
  }

  std::vector<std::string> order;
  for (const auto* name : {"Baseline", "DAC", "EOR"})
    if (by_ctrl.count(name)) order.emplace_back(name);
  for (const auto& [ctrl, _] : by_ctrl)
    if (std::find(order.begin(), order.end(), ctrl) == order.end()) order.push_back(ctrl);

  std::vector<double> speeds;
  for (const auto& [v, seed] : keys)
    if (speeds.empty() || speeds.back() != v) speeds.push_back(v);

  ComparisonTable table;
  std::map<std::string, std::map<double, MetricsReport>> per_speed;
  for (double v : speeds) {
    std::map<std::string, MetricsReport> means;
    std::string region;
    for (const auto& ctrl : order) {
      std::vector<MetricsReport> reps;
      for (const auto& [k, row] : by_ctrl.at(ctrl))
        if (k.first == v) {
          reps.push_back(row->report);
          if (region.empty()) region = row->region;
          else if (region != row->region) region = "mixed";
        }
      means[ctrl] = per_speed[ctrl][v] = mean_report(reps);
    }
    for (const auto& ctrl : order) table.rows.push_back({"v0", format_number(v), region, ctrl, means[ctrl].values()});
    for (const auto& ctrl : order)
      if (ctrl != bl)
        table.rows.push_back(
            {"v0", format_number(v), region, percent_label(ctrl), percent_vs_baseline(means[ctrl], means[bl])});
  }

  const std::vector<double> weights = speeds.size() == 1 ? std::vector<double>{1.0} : weibull_weights(speeds, weibull);
  std::map<std::string, MetricsReport> life;
  for (const auto& ctrl : order) {
    life[ctrl] = lifetime_aggregate(per_speed[ctrl], weights);
    table.rows.push_back({"lifetime", "all", "", ctrl, life[ctrl].values()});
  }
  for (const auto& ctrl : order)
    if (ctrl != bl)
      table.rows.push_back({"lifetime", "all", "", percent_label(ctrl), percent_vs_baseline(life[ctrl], life[bl])});
  return table;
}

// --- sweep ------------------------------------------------------------------

struct SweepSpec {
  std::vector<double> speeds;
  std::vector<ControllerKind> controllers;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

struct SweepEntry {
  std::string id;
  ControllerKind controller;
  double v0;
  std::uint64_t seed;
  std::string status;  // "ok", "failed: ..."
  double wall = 0.0;
  std::string dir;
  std::string note;  // truncation or stall note of a completed run
};

struct SweepOutcome {
  std::vector<SweepEntry> entries;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::vector<MetricsRow> rows;
  std::optional<ComparisonTable> table;
  int first_failure_code = 0;
};

inline std::map<std::string, SweepEntry> read_sweep_manifest(const std::string& path) {
  std::map<std::string, SweepEntry> done;
  if (!std::filesystem::exists(path)) return done;
  const CsvTable t = CsvTable::read(path);
  const int c_id = t.column("run_id"), c_ctrl = t.column("controller"), c_v0 = t.column("v0"),
            c_seed = t.column("seed"), c_status = t.column("status"), c_wall = t.column("wall_s"),
            c_dir = t.column("dir"), c_note = t.column("note");
  for (const auto& r : t.rows)
    done[r[c_id]] = {r[c_id], parse_controller(r[c_ctrl]), parse_cell(r[c_v0], path),
                     static_cast<std::uint64_t>(parse_cell(r[c_seed], path)), r[c_status],
                     parse_cell(r[c_wall], path), r[c_dir], r[c_note]};
  return done;
}

inline void write_sweep_manifest(const std::string& path, const std::vector<SweepEntry>& entries) {
  CsvTable t;
  t.header = {"run_id", "controller", "v0", "seed", "status", "wall_s", "dir", "note"};
  for (const auto& e : entries)
    t.rows.push_back({e.id, to_string(e.controller), format_number(e.v0), std::to_string(e.seed), e.status,
                      format_number(e.wall), e.dir, e.note});
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw IoError("cannot write '" + tmp + "'");
    t.write(f);
    if (!f) throw IoError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Exit status for an exception escaping a run.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 4;
  return 3;
}

/// Cartesian sweep into `root/runs/<id>/`. Runs recorded as "ok" in
/// `root/manifest.csv` with their metrics file present are skipped. After all
/// runs succeed, writes runs.csv and comparison.csv into `root`.
inline SweepOutcome sweep(const SimConfig& base, const MetricsConfig& mc, const SweepSpec& spec, const std::string& root,
                          const std::string& config_path, const std::map<std::string, std::string>& echo,
                          std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  if (spec.speeds.empty() || spec.controllers.empty() || spec.seeds.empty())
    throw ConfigError("sweep", "speeds, controllers and seeds must be non-empty");
  if (spec.jobs < 1) throw ConfigError("jobs", "must be at least 1");
  std::error_code ec;
  fs::create_directories(fs::path(root) / "runs", ec);
  if (ec) throw IoError("cannot create '" + root + "': " + ec.message());
  const std::string manifest_path = (fs::path(root) / "manifest.csv").string();
  const auto previous = read_sweep_manifest(manifest_path);

  SweepOutcome out;
  std::vector<std::size_t> todo;
  for (double v : spec.speeds)
    for (auto c : spec.controllers)
      for (auto s : spec.seeds) {
        SweepEntry e{run_id(c, v, s), c, v, s, "pending", 0.0, (fs::path(root) / "runs" / run_id(c, v, s)).string(), ""};
        const auto it = previous.find(e.id);
        if (it != previous.end() && it->second.status == "ok" && fs::exists(fs::path(e.dir) / "metrics.csv")) {
          e.status = "ok";
          e.wall = it->second.wall;
          e.note = it->second.note;
          ++out.skipped;
        } else {
          todo.push_back(out.entries.size());
        }
        out.entries.push_back(e);
      }
  for (auto& e : out.entries) {
    SimConfig c = base;
    c.v0 = e.v0;
    c.controller = e.controller;
    c.seed = e.seed;
    c.validate();
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      SweepEntry& e = out.entries[todo[k]];
      SimConfig c = base;
      c.v0 = e.v0;
      c.controller = e.controller;
      c.seed = e.seed;
      std::string status = "ok", note;
      double wall = 0.0;
      int code = 0;
      try {
        const RunOutcome r = simulate_to(c, mc, e.dir, config_path, echo);
        wall = r.manifest.wall_clock;
        note = r.meta.note;
      } catch (const std::exception& ex) {
        status = std::string("failed: ") + ex.what();
        code = exit_code_for(ex);
      }
      for (auto* str : {&status, &note}) {
        std::replace(str->begin(), str->end(), ',', ';');
        std::replace(str->begin(), str->end(), '\n', ' ');
      }
      std::lock_guard lock(mu);
      e.status = status;
      e.note = note;
      e.wall = wall;
      ++out.executed;
      if (code && !out.first_failure_code) out.first_failure_code = code;
      write_sweep_manifest(manifest_path, out.entries);
      if (progress) *progress << e.id << " " << status << (note.empty() ? "" : " (" + note + ")") << "\n" << std::flush;
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(spec.jobs, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  write_sweep_manifest(manifest_path, out.entries);
  if (out.first_failure_code) return out;

  for (const auto& e : out.entries) {
    auto rows = read_metrics_rows((fs::path(e.dir) / "metrics.csv").string());
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  write_metrics_rows((fs::path(root) / "runs.csv").string(), out.rows);
  if (std::find(spec.controllers.begin(), spec.controllers.end(), ControllerKind::Baseline) != spec.controllers.end()) {
    out.table = compare_runs(out.rows, mc.weibull);
    std::ofstream f(fs::path(root) / "comparison.csv");
    if (!f) throw IoError("cannot write comparison.csv");
    out.table->write(f);
  }
  return out;
}

// --- configuration ----------------------------------------------------------

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

struct LoadedConfig {
  SimConfig sim;
  MetricsConfig metrics;
  SweepSpec sweep;
  std::map<std::string, std::string> echo;
};

/// Builds every configuration object from flat keys and rejects keys nothing
/// consumed.
inline LoadedConfig load_run_config(const KeyValueConfig& cfg) {
  LoadedConfig out;
  out.sim = SimConfig::from_config(cfg);
  out.metrics = MetricsConfig::from_config(cfg);
  try {
    for (const auto& s : split_list(cfg.get_string("sweep_speeds", "8,10,12,14,16,18,20,22,24")))
      out.sweep.speeds.push_back(std::stod(s));
  } catch (const std::invalid_argument&) {
    throw ConfigError("sweep_speeds", "not a list of numbers");
  }
  for (const auto& s : split_list(cfg.get_string("sweep_controllers", "Baseline,DAC,EOR")))
    out.sweep.controllers.push_back(parse_controller(s));
  for (const auto& s : split_list(cfg.get_string("sweep_seeds", "1,2,3,4,5"))) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("sweep_seeds", "not a list of integers");
    out.sweep.seeds.push_back(v);
  }
  const auto unused = cfg.unused_keys();
  if (!unused.empty()) throw ConfigError(*unused.begin(), "unknown key");
  out.sim.validate();
  out.echo = cfg.entries();
  return out;
}

}  // namespace torsim
