#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <string>
#include <vector>

#include "torsim/errors.hpp"
#include "torsim/wind.hpp"

namespace torsim {

struct LidarConfig {
  double focal_distance = 60.0;   // f [m]
  double preview_horizon = 1.5;   // T_pl [s]
  int scan_points = 24;           // retained for interface fidelity
  double measurement_noise = 0.0; // hook, unused
  double wind_evolution = 0.0;    // hook, unused

  /// Composite −3 dB bandwidth 87/f² [Hz].
  double filter_cutoff() const { return 87.0 / (focal_distance * focal_distance); }

  double preview_time(double v0) const { return focal_distance / v0; }

  void validate(double v0_max) const {
    if (!(focal_distance > 0.0)) throw ConfigError("lidar_focal_distance", "must be positive");
    if (!(preview_horizon > 0.0) || preview_horizon > focal_distance / v0_max + 1e-12)
      throw ConfigError("lidar_preview_horizon", "must lie in (0, f/v_max]");
    if (scan_points < 1) throw ConfigError("lidar_scan_points", "must be at least 1");
  }
};

/// Second-order section in direct form II transposed, a0 = 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};

  double dc_gain() const { return (b[0] + b[1] + b[2]) / (a[0] + a[1] + a[2]); }

  /// Second-order Butterworth low-pass by the bilinear transform with the
  /// analogue prototype prewarped to `cutoff` [Hz].
  static Biquad butterworth_lowpass(double cutoff, double fs) {
    if (!(cutoff > 0.0) || !(cutoff < 0.5 * fs)) throw DomainError("butterworth_lowpass: cutoff outside (0, fs/2)");
    const double k = std::tan(std::numbers::pi * cutoff / fs);
    const double k2 = k * k, q = std::numbers::sqrt2;
    const double norm = 1.0 / (1.0 + q * k + k2);
    Biquad s;
    s.b = {k2 * norm, 2.0 * k2 * norm, k2 * norm};
    s.a = {1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - q * k + k2) * norm};
    return s;
  }

  /// Filter state that makes a constant input x0 pass as a constant output.
  std::array<double, 2> steady_state(double x0) const {
    const double g = dc_gain();
    const double z2 = b[2] - a[2] * g;
    return {(b[1] - a[1] * g + z2) * x0, z2 * x0};
  }

  void run(std::vector<double>& x, std::array<double, 2> z) const {
    for (double& v : x) {
      const double in = v;
      const double out = b[0] * in + z[0];
      z[0] = b[1] * in - a[1] * out + z[1];
      z[1] = b[2] * in - a[2] * out;
      v = out;
    }
  }

  /// |H(e^{jω})| at frequency f [Hz].
  double magnitude(double f, double fs) const {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    const std::complex<double> num = b[0] + z1 * (b[1] + z1 * b[2]);
    const std::complex<double> den = a[0] + z1 * (a[1] + z1 * a[2]);
    return std::abs(num / den);
  }
};

/// Single-pass cutoff of a second-order Butterworth whose forward-backward
/// composite is −3 dB at `composite_cutoff`: tan(πf₁/fs) = tan(πf_c/fs)/(√2−1)^{1/4}.
inline double single_pass_cutoff(double composite_cutoff, double fs) {
  const double warp = std::pow(std::numbers::sqrt2 - 1.0, 0.25);
  return fs / std::numbers::pi * std::atan(std::tan(std::numbers::pi * composite_cutoff / fs) / warp);
}

/// Zero-phase forward-backward filtering with odd reflection padding and
/// steady-state initial conditions at both ends.
inline std::vector<double> filtfilt(const Biquad& s, const std::vector<double>& x, std::size_t padlen) {
  if (x.size() < 2) throw DomainError("filtfilt: need at least two samples");
  padlen = std::min(padlen, x.size() - 1);
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

  s.run(ext, s.steady_state(ext.front()));
  std::reverse(ext.begin(), ext.end());
  s.run(ext, s.steady_state(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

/// Filtered frozen-turbulence preview of a wind series. The track is indexed
/// by the time the wind reaches the rotor; a measurement taken at time t sees
/// the wind that arrives f/v0 seconds later.
class PreviewTrack {
 public:
  PreviewTrack(const WindSeries& w, const LidarConfig& cfg, double v0) : cfg_(cfg), v0_(v0) {
    if (!(v0 > 0.0)) throw DomainError("PreviewTrack: mean speed must be positive");
    const double fs = 1.0 / w.dt;
    const double fc = cfg.filter_cutoff();
    filter_ = Biquad::butterworth_lowpass(single_pass_cutoff(fc, fs), fs);
    const auto pad = static_cast<std::size_t>(std::ceil(6.0 / fc * fs));
    track_.dt = w.dt;
    track_.mean_speed = w.mean_speed;
    track_.turbulence_intensity = w.turbulence_intensity;
    track_.seed = w.seed;
    track_.samples = filtfilt(filter_, w.samples, pad);
  }

  const LidarConfig& config() const { return cfg_; }
  const Biquad& filter() const { return filter_; }
  double preview_time() const { return cfg_.preview_time(v0_); }

  /// Filtered wind at rotor-arrival time τ.
  double at_rotor(double tau) const {
    if (tau > track_.duration() + 1e-9) throw EndOfDataError("preview beyond end of wind series");
    return track_.at(std::max(0.0, tau));
  }

  /// LIDAR reading at time t: lowpass(v_x(t + f/v0)).
  double measure(double t) const { return at_rotor(t + preview_time()); }

  /// Measurements over [t, t + T_pl] at period `Ts` (endpoints inclusive).
  std::vector<double> window(double t, double Ts) const {
    const auto count = static_cast<std::size_t>(std::llround(cfg_.preview_horizon / Ts)) + 1;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = measure(t + static_cast<double>(k) * Ts);
    return out;
  }

  /// Last time at which a measurement is defined.
  double last_measurement_time() const { return track_.duration() - preview_time(); }

  const WindSeries& series() const { return track_; }

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write preview CSV '" + path + "'");
    f << std::setprecision(17) << "time_s,preview_mps\n";
    for (std::size_t i = 0; i < track_.samples.size(); ++i)
      f << static_cast<double>(i) * track_.dt << "," << track_.samples[i] << "\n";
  }

 private:
  LidarConfig cfg_;
  double v0_;
  Biquad filter_;
  WindSeries track_;
};

inline double measure(const PreviewTrack& track, double t) { return track.measure(t); }

inline std::vector<double> preview_window(const PreviewTrack& track, double t, double Ts) {
  return track.window(t, Ts);
}

}  // namespace torsim
