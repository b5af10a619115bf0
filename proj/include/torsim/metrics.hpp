#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "torsim/config.hpp"
#include "torsim/errors.hpp"
#include "torsim/sim.hpp"
#include "torsim/wind.hpp"

namespace torsim {

struct Cycle {
  double range = 0.0;
  double mean = 0.0;
  double count = 1.0;  // 1 for a closed cycle, 0.5 for a residue half cycle

  bool operator==(const Cycle&) const = default;
};

using CycleSet = std::vector<Cycle>;

/// Local extrema of a series; plateaus collapse to one point and both end
/// points are kept.
inline std::vector<double> turning_points(const std::vector<double>& x) {
  std::vector<double> tp;
  for (double v : x) {
    if (!tp.empty() && v == tp.back()) continue;
    if (tp.size() >= 2 && (tp.back() - tp[tp.size() - 2]) * (v - tp.back()) > 0.0) {
      tp.back() = v;  // still monotone: extend the current excursion
      continue;
    }
    tp.push_back(v);
  }
  return tp;
}

/// Rainflow counting by the four-point rule; the residue is counted as half
/// cycles between consecutive residual reversals.
inline CycleSet rainflow(const std::vector<double>& series) {
  if (series.size() < 2) throw DomainError("rainflow: need at least two samples");
  CycleSet out;
  std::vector<double> stack;
  for (double v : turning_points(series)) {
    stack.push_back(v);
    while (stack.size() >= 4) {
      const auto n = stack.size();
      const double a = stack[n - 4], b = stack[n - 3], c = stack[n - 2], d = stack[n - 1];
      const double inner = std::abs(c - b);
      if (inner <= std::abs(b - a) && inner <= std::abs(d - c)) {
        out.push_back({inner, 0.5 * (b + c), 1.0});
        stack.erase(stack.end() - 3, stack.end() - 1);
      } else {
        break;
      }
    }
  }
  for (std::size_t i = 1; i < stack.size(); ++i)
    out.push_back({std::abs(stack[i] - stack[i - 1]), 0.5 * (stack[i] + stack[i - 1]), 0.5});
  return out;
}

/// Damage-equivalent load (Σ nᵢ Sᵢᵐ / N_ref)^{1/m}.
inline double damage_equivalent_load(const CycleSet& cycles, double m, double n_ref) {
  if (!(m >= 1.0)) throw DomainError("del: Woehler exponent must be >= 1");
  if (!(n_ref > 0.0)) throw DomainError("del: reference count must be positive");
  if (cycles.empty()) return 0.0;
  // Factor out the largest range to keep S^m finite for large exponents.
  double smax = 0.0;
  for (const auto& c : cycles) smax = std::max(smax, c.range);
  if (smax == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& c : cycles) sum += c.count * std::pow(c.range / smax, m);
  return smax * std::pow(sum / n_ref, 1.0 / m);
}

struct Spectrum {
  std::vector<double> freq;
  std::vector<double> density;
};

/// Welch estimate of the one-sided power spectral density (Hann window, 50 %
/// overlap, per-segment mean removal).
inline Spectrum psd_welch(const std::vector<double>& x, double fs, double segment_s) {
  if (!(fs > 0.0) || !(segment_s > 0.0)) throw DomainError("psd_welch: fs and segment length must be positive");
  const auto nseg = static_cast<std::size_t>(std::llround(segment_s * fs));
  if (nseg < 4) throw DomainError("psd_welch: segment too short");
  const std::size_t step = nseg / 2;
  if (x.size() < nseg + step) throw DomainError("psd_welch: series shorter than two overlapping segments");

  std::vector<double> win(nseg);
  double wss = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nseg));
    wss += win[i] * win[i];
  }
  const std::size_t nfreq = nseg / 2 + 1;
  std::vector<double> acc(nfreq, 0.0);
  Eigen::FFT<double> fft;
  std::vector<double> seg(nseg);
  std::vector<std::complex<double>> spec;
  std::size_t count = 0;
  for (std::size_t start = 0; start + nseg <= x.size(); start += step, ++count) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nseg; ++i) mean += x[start + i];
    mean /= static_cast<double>(nseg);
    for (std::size_t i = 0; i < nseg; ++i) seg[i] = (x[start + i] - mean) * win[i];
    fft.fwd(spec, seg);
    for (std::size_t k = 0; k < nfreq; ++k) acc[k] += std::norm(spec[k]);
  }
  Spectrum s;
  s.freq.resize(nfreq);
  s.density.resize(nfreq);
  for (std::size_t k = 0; k < nfreq; ++k) {
    const bool edge = k == 0 || (nseg % 2 == 0 && k == nfreq - 1);
    s.freq[k] = static_cast<double>(k) * fs / static_cast<double>(nseg);
    s.density[k] = (edge ? 1.0 : 2.0) * acc[k] / (fs * wss * static_cast<double>(count));
  }
  return s;
}

/// Block-average decimation by an integer factor.
inline std::vector<double> decimate(const std::vector<double>& x, int factor) {
  if (factor < 1) throw DomainError("decimate: factor must be >= 1");
  std::vector<double> out;
  out.reserve(x.size() / static_cast<std::size_t>(factor));
  for (std::size_t i = 0; i + static_cast<std::size_t>(factor) <= x.size(); i += static_cast<std::size_t>(factor)) {
    double s = 0.0;
    for (int k = 0; k < factor; ++k) s += x[i + static_cast<std::size_t>(k)];
    out.push_back(s / factor);
  }
  return out;
}

/// RMS of the finite-difference rate, sqrt((1/T) Σ (Δx/dt)² dt).
inline double control_torque_rate(const std::vector<double>& torque, double dt) {
  if (torque.size() < 2 || !(dt > 0.0)) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < torque.size(); ++i) {
    const double r = (torque[i] - torque[i - 1]) / dt;
    sum += r * r * dt;
  }
  return std::sqrt(sum / (dt * static_cast<double>(torque.size() - 1)));
}

/// Total variation ∫|dθ/dt| dt.
inline double pitch_travel(const std::vector<double>& theta) {
  double tv = 0.0;
  for (std::size_t i = 1; i < theta.size(); ++i) tv += std::abs(theta[i] - theta[i - 1]);
  return tv;
}

inline double mean_of(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double std_of(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double rms_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

struct MetricsConfig {
  double wohler_tower = 4.0;
  double wohler_lss = 4.0;
  double wohler_blade = 10.0;
  double n_ref = 2e6;
  double psd_segment = 600.0;  // s
  int psd_decimation = 8;
  WeibullSpec weibull;

  static MetricsConfig from_config(const KeyValueConfig& cfg) {
    MetricsConfig m;
    m.wohler_tower = cfg.get_double("wohler_tower", m.wohler_tower);
    m.wohler_lss = cfg.get_double("wohler_lss", m.wohler_lss);
    m.wohler_blade = cfg.get_double("wohler_blade", m.wohler_blade);
    m.n_ref = cfg.get_double("del_n_ref", m.n_ref);
    m.psd_segment = cfg.get_double("psd_segment", m.psd_segment);
    m.psd_decimation = static_cast<int>(cfg.get_int("psd_decimation", m.psd_decimation));
    m.weibull.shape = cfg.get_double("weibull_shape", m.weibull.shape);
    m.weibull.scale = cfg.get_double("weibull_scale", m.weibull.scale);
    if (!(m.wohler_tower >= 1.0)) throw ConfigError("wohler_tower", "must be >= 1");
    if (!(m.wohler_lss >= 1.0)) throw ConfigError("wohler_lss", "must be >= 1");
    if (!(m.wohler_blade >= 1.0)) throw ConfigError("wohler_blade", "must be >= 1");
    if (!(m.n_ref > 0.0)) throw ConfigError("del_n_ref", "must be positive");
    if (!(m.psd_segment > 0.0)) throw ConfigError("psd_segment", "must be positive");
    if (m.psd_decimation < 1) throw ConfigError("psd_decimation", "must be >= 1");
    if (!(m.weibull.shape > 0.0)) throw ConfigError("weibull_shape", "must be positive");
    if (!(m.weibull.scale > 0.0)) throw ConfigError("weibull_scale", "must be positive");
    return m;
  }
};

struct MetricsReport {
  double DEL_MyT = 0.0;    // N·m
  double DEL_MyB = 0.0;    // N·m
  double DEL_LSS = 0.0;    // N·m
  double std_P = 0.0;      // W
  double std_Omega = 0.0;  // rad/s
  double std_lambda = 0.0;
  double P_mean = 0.0;     // W
  double CTR = 0.0;        // N·m/s
  double PT = 0.0;         // rad

  static const std::vector<std::string>& field_names() {
    static const std::vector<std::string> n{"DEL_MyT", "DEL_MyB", "DEL_LSS", "std_P",
                                            "std_Omega", "std_lambda", "P_mean", "CTR", "PT"};
    return n;
  }

  std::vector<double> values() const {
    return {DEL_MyT, DEL_MyB, DEL_LSS, std_P, std_Omega, std_lambda, P_mean, CTR, PT};
  }

  static MetricsReport from_values(const std::vector<double>& v) {
    if (v.size() != 9) throw DomainError("MetricsReport: expected 9 values");
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
  }

  /// Non-negativity and the mean-power bound against rated mechanical power.
  bool consistent(const TurbineParams& p) const {
    for (double v : values())
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
    return P_mean <= 1.05 * p.rated_mechanical_power();
  }
};

/// Samples of a channel at or after `t0`.
inline std::vector<double> window_after(const SimLog& log, int channel, double t0) {
  const auto& t = log.channel(SimLog::kTime);
  const auto& x = log.channel(channel);
  const auto first = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t0 - 1e-9) - t.begin());
  return {x.begin() + static_cast<std::ptrdiff_t>(first), x.end()};
}

/// Metrics on the post-warm-up part of a log. `Ts_ctrl` sets the rate at which
/// the torque command is differenced for CTR.
inline MetricsReport compute_metrics(const SimLog& log, double warmup, double Ts_ctrl, const TurbineParams& p,
                                     const MetricsConfig& mc = {}) {
  if (log.size() < 2) throw DomainError("compute_metrics: log too short");
  const double dt = log.dt();
  const auto myt = window_after(log, SimLog::kTowerMoment, warmup);
  if (myt.size() < 2) throw DomainError("compute_metrics: no samples after warm-up");
  const auto myb = window_after(log, SimLog::kBladeMoment, warmup);
  const auto lss = window_after(log, SimLog::kShaftTorque, warmup);
  const auto pwr = window_after(log, SimLog::kPower, warmup);
  const auto om = window_after(log, SimLog::kRotorSpeed, warmup);
  const auto v = window_after(log, SimLog::kWind, warmup);
  const auto mg = window_after(log, SimLog::kGenTorque, warmup);
  const auto th = window_after(log, SimLog::kPitch, warmup);

  MetricsReport r;
  r.DEL_MyT = damage_equivalent_load(rainflow(myt), mc.wohler_tower, mc.n_ref);
  r.DEL_MyB = damage_equivalent_load(rainflow(myb), mc.wohler_blade, mc.n_ref);
  r.DEL_LSS = damage_equivalent_load(rainflow(lss), mc.wohler_lss, mc.n_ref);
  r.std_P = std_of(pwr);
  r.std_Omega = std_of(om);
  std::vector<double> lam(om.size());
  for (std::size_t i = 0; i < om.size(); ++i) lam[i] = om[i] * p.rotor_radius / v[i];
  r.std_lambda = std_of(lam);
  r.P_mean = mean_of(pwr);
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(Ts_ctrl / dt)));
  std::vector<double> cmd;
  for (std::size_t i = 0; i < mg.size(); i += stride) cmd.push_back(mg[i]);
  r.CTR = control_torque_rate(cmd, dt * static_cast<double>(stride));
  r.PT = pitch_travel(th);
  return r;
}

// --- aggregation and tables ------------------------------------------------

inline MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DomainError("mean_report: no reports");
  std::vector<double> acc(9, 0.0);
  for (const auto& r : reports) {
    const auto v = r.values();
    for (std::size_t i = 0; i < 9; ++i) acc[i] += v[i];
  }
  for (double& a : acc) a /= static_cast<double>(reports.size());
  return MetricsReport::from_values(acc);
}

/// Weighted arithmetic mean per metric over mean-wind bins.
inline MetricsReport lifetime_aggregate(const std::map<double, MetricsReport>& per_speed,
                                        const std::vector<double>& weights) {
  if (per_speed.empty() || per_speed.size() != weights.size())
    throw DomainError("lifetime_aggregate: need one weight per speed");
  std::vector<double> acc(9, 0.0);
  double wsum = 0.0;
  std::size_t i = 0;
  for (const auto& [speed, r] : per_speed) {
    const auto v = r.values();
    for (std::size_t k = 0; k < 9; ++k) acc[k] += weights[i] * v[k];
    wsum += weights[i++];
  }
  if (!(wsum > 0.0)) throw DomainError("lifetime_aggregate: weights sum to zero");
  for (double& a : acc) a /= wsum;
  return MetricsReport::from_values(acc);
}

/// Percent improvement of `x` over `baseline` per metric: lower is better for
/// loads, deviations and actuation, higher is better for mean power.
inline std::vector<double> percent_vs_baseline(const MetricsReport& x, const MetricsReport& baseline) {
  const auto a = x.values(), b = baseline.values();
  std::vector<double> out(9);
  for (std::size_t i = 0; i < 9; ++i) {
    const double sign = i == 6 ? -1.0 : 1.0;
    out[i] = b[i] == 0.0 ? 0.0 : sign * 100.0 * (b[i] - a[i]) / b[i];
  }
  return out;
}

inline void write_metrics_header(std::ostream& out, const std::vector<std::string>& leading) {
  bool first = true;
  for (const auto& l : leading) out << (first ? "" : ",") << l, first = false;
  for (const auto& n : MetricsReport::field_names()) out << (first ? "" : ",") << n, first = false;
  out << "\n";
}

inline void write_metrics_row(std::ostream& out, const std::vector<std::string>& leading, const MetricsReport& r) {
  out << std::setprecision(17);
  bool first = true;
  for (const auto& l : leading) out << (first ? "" : ",") << l, first = false;
  for (double v : r.values()) out << (first ? "" : ",") << v, first = false;
  out << "\n";
}

/// Minimal CSV table: header names plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw IoError("CSV: missing column '" + name + "'");
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  }

  static CsvTable read(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open CSV '" + path + "'");
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw IoError("CSV '" + path + "' is empty");
    t.header = split(line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != t.header.size()) throw IoError("CSV '" + path + "': ragged row");
      t.rows.push_back(std::move(cells));
    }
    return t;
  }

  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << "\n";
    }
  }
};

inline std::string format_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace torsim
