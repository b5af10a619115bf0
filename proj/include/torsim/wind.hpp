#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "torsim/errors.hpp"

namespace torsim {

enum class TurbulenceClass { A, B, C };

inline TurbulenceClass parse_turbulence_class(const std::string& s) {
  if (s == "A" || s == "a") return TurbulenceClass::A;
  if (s == "B" || s == "b") return TurbulenceClass::B;
  if (s == "C" || s == "c") return TurbulenceClass::C;
  throw ConfigError("wind_class", "expected A, B or C, got '" + s + "'");
}

/// IEC normal-turbulence standard deviation σ = I_ref (0.75 v + 5.6).
inline double turbulence_sigma(double v0, TurbulenceClass c) {
  const double iref = c == TurbulenceClass::A ? 0.16 : c == TurbulenceClass::B ? 0.14 : 0.12;
  return iref * (0.75 * v0 + 5.6);
}

inline constexpr double kKaimalLengthScale = 340.2;  // m, longitudinal

/// One-sided Kaimal spectrum of the longitudinal component [ (m/s)²/Hz ].
inline double kaimal_psd(double f, double v0, double sigma, double length = kKaimalLengthScale) {
  return 4.0 * sigma * sigma * length / v0 / std::pow(1.0 + 6.0 * f * length / v0, 5.0 / 3.0);
}

/// Uniformly sampled hub-height longitudinal wind. The record is treated as
/// periodic: the interval after the last sample interpolates back to the
/// first, so it spans exactly size()·dt seconds.
struct WindSeries {
  double dt = 0.05;
  std::vector<double> samples;
  double mean_speed = 0.0;
  double turbulence_intensity = 0.0;
  std::uint64_t seed = 0;
  std::int64_t clamp_count = 0;  // samples lifted to the positivity floor

  double duration() const { return dt * static_cast<double>(samples.size()); }

  /// Linear interpolation at time t ∈ [0, duration()].
  double at(double t) const {
    if (samples.empty()) throw DomainError("WindSeries::at: empty series");
    if (t < 0.0 || t > duration() + 1e-9) throw EndOfDataError("WindSeries::at: t outside record");
    const double pos = t / dt;
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= samples.size()) i = samples.size() - 1;
    const double frac = pos - static_cast<double>(i);
    const double next = i + 1 < samples.size() ? samples[i + 1] : samples.front();
    return samples[i] + frac * (next - samples[i]);
  }

  double sample_mean() const {
    double s = 0.0;
    for (double v : samples) s += v;
    return s / static_cast<double>(samples.size());
  }
};

inline constexpr double kMinWindSample = 0.5;  // m/s

/// Single-point turbulent wind by random-phase sum of cosines over the Kaimal
/// spectrum, evaluated with an inverse FFT. Deterministic in all arguments.
inline WindSeries synthesize_wind(double v0, TurbulenceClass cls, double duration, double dt, std::uint64_t seed) {
  if (!(v0 > 0.0)) throw DomainError("synthesize_wind: mean speed must be positive");
  if (!(duration >= 200.0)) throw DomainError("synthesize_wind: duration must be at least 200 s");
  if (!(dt > 0.0)) throw DomainError("synthesize_wind: dt must be positive");
  if (dt > 0.1) throw DomainError("synthesize_wind: dt coarser than 0.1 s loses spectral content");

  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  const double sigma = turbulence_sigma(v0, cls);
  const double df = 1.0 / (static_cast<double>(n) * dt);

  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::vector<std::complex<double>> spectrum(n, {0.0, 0.0});
  const std::size_t kmax = (n - 1) / 2;  // Nyquist bin left empty
  const double half_n = 0.5 * static_cast<double>(n);
  for (std::size_t k = 1; k <= kmax; ++k) {
    const double f = static_cast<double>(k) * df;
    const double amp = std::sqrt(2.0 * kaimal_psd(f, v0, sigma) * df);
    const double phase = 2.0 * std::numbers::pi * unit();
    spectrum[k] = std::polar(half_n * amp, phase);
    spectrum[n - k] = std::conj(spectrum[k]);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> time;
  fft.inv(time, spectrum);

  WindSeries w;
  w.dt = dt;
  w.mean_speed = v0;
  w.turbulence_intensity = sigma / v0;
  w.seed = seed;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = v0 + time[i].real();
    if (v < kMinWindSample) {
      v = kMinWindSample;
      ++w.clamp_count;
    }
    w.samples[i] = v;
  }
  return w;
}

/// (1/t) ∫₀ᵗ v dτ by the trapezoid rule on the sample grid.
inline double cumulative_mean(const WindSeries& w, double t) {
  if (!(t > 0.0) || t > w.duration() + 1e-9) throw DomainError("cumulative_mean: t outside (0, duration]");
  const double pos = t / w.dt;
  const auto whole = static_cast<std::size_t>(std::floor(pos));
  double integral = 0.0;
  for (std::size_t i = 0; i < whole && i < w.samples.size(); ++i) {
    const double next = i + 1 < w.samples.size() ? w.samples[i + 1] : w.samples.front();
    integral += 0.5 * (w.samples[i] + next) * w.dt;
  }
  const double rest = t - static_cast<double>(whole) * w.dt;
  if (rest > 0.0 && whole < w.samples.size()) {
    const double a = w.samples[whole];
    integral += 0.5 * (a + w.at(t)) * rest;
  }
  return integral / t;
}

struct WeibullSpec {
  double shape = 2.0;  // k
  double scale = 9.0;  // m/s

  double pdf(double v) const {
    if (v < 0.0) return 0.0;
    const double x = v / scale;
    return shape / scale * std::pow(x, shape - 1.0) * std::exp(-std::pow(x, shape));
  }

  double mode() const { return shape > 1.0 ? scale * std::pow((shape - 1.0) / shape, 1.0 / shape) : 0.0; }
};

/// Weights proportional to the Weibull density at each bin centre, summing to 1.
inline std::vector<double> weibull_weights(const std::vector<double>& speeds, const WeibullSpec& spec) {
  if (speeds.empty()) throw DomainError("weibull_weights: no speeds");
  if (!(spec.shape > 0.0 && spec.scale > 0.0)) throw DomainError("weibull_weights: shape and scale must be positive");
  for (std::size_t i = 1; i < speeds.size(); ++i)
    if (!(speeds[i] > speeds[i - 1])) throw DomainError("weibull_weights: speeds must be strictly increasing");
  std::vector<double> w(speeds.size());
  double total = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i) total += (w[i] = spec.pdf(speeds[i]));
  if (!(total > 0.0)) throw DomainError("weibull_weights: zero total density");
  for (double& x : w) x /= total;
  return w;
}

// --- CSV ------------------------------------------------------------------

inline void write_wind_csv(const WindSeries& w, std::ostream& out) {
  out << std::setprecision(17);
  out << "# v0=" << w.mean_speed << " TI=" << w.turbulence_intensity << " seed=" << w.seed << "\n";
  out << "time_s,wind_mps\n";
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    out << static_cast<double>(i) * w.dt << "," << w.samples[i] << "\n";
}

inline void write_wind_csv(const WindSeries& w, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write wind CSV '" + path + "'");
  write_wind_csv(w, f);
}

inline WindSeries read_wind_csv(std::istream& in) {
  WindSeries w;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#", 0) != 0) throw IoError("wind CSV: missing '#' metadata line");
  {
    std::istringstream meta(line.substr(1));
    std::string tok;
    bool have_v0 = false;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "v0") w.mean_speed = std::stod(val), have_v0 = true;
        else if (key == "TI") w.turbulence_intensity = std::stod(val);
        else if (key == "seed") w.seed = std::stoull(val);
      } catch (const std::exception&) {
        throw IoError("wind CSV: bad metadata value for '" + key + "'");
      }
    }
    if (!have_v0) throw IoError("wind CSV: metadata lacks v0");
  }
  if (!std::getline(in, line) || line.rfind("time_s,wind_mps", 0) != 0) throw IoError("wind CSV: bad header");
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("wind CSV: malformed row '" + line + "'");
    try {
      times.push_back(std::stod(line.substr(0, comma)));
      w.samples.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError("wind CSV: malformed row '" + line + "'");
    }
  }
  if (w.samples.size() < 2) throw IoError("wind CSV: need at least two samples");
  w.dt = times[1] - times[0];
  if (!(w.dt > 0.0)) throw IoError("wind CSV: non-increasing time column");
  for (double v : w.samples)
    if (!(v > 0.0)) throw IoError("wind CSV: wind samples must be positive");
  return w;
}

inline WindSeries read_wind_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open wind CSV '" + path + "'");
  return read_wind_csv(f);
}

}  // namespace torsim
