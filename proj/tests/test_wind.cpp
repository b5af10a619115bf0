#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "torsim/metrics.hpp"
#include "torsim/wind.hpp"

using namespace torsim;

namespace {

double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

double sinc2(double x) { return x == 0.0 ? 1.0 : std::pow(std::sin(x) / x, 2); }

/// Variance of the T-window mean of the synthesized random-phase process:
/// Σ S(f_k) Δf sinc²(π f_k T), optionally times |e^{j2πf_kT} − 1|² for the
/// difference of two adjacent windows.
double window_mean_variance(double v0, double duration, double dt, double T, bool difference) {
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  const double df = 1.0 / (static_cast<double>(n) * dt);
  const double sigma = turbulence_sigma(v0, TurbulenceClass::A);
  double var = 0.0;
  for (std::size_t k = 1; k <= (n - 1) / 2; ++k) {
    const double f = static_cast<double>(k) * df;
    double term = kaimal_psd(f, v0, sigma) * df * sinc2(std::numbers::pi * f * T);
    if (difference) term *= 4.0 * std::pow(std::sin(std::numbers::pi * f * T), 2);
    var += term;
  }
  return var;
}

}  // namespace

TEST(Turbulence, ClassIntensities) {
  EXPECT_NEAR(turbulence_sigma(18.0, TurbulenceClass::A), 0.16 * (0.75 * 18.0 + 5.6), 1e-12);
  EXPECT_NEAR(turbulence_sigma(10.0, TurbulenceClass::B), 0.14 * (0.75 * 10.0 + 5.6), 1e-12);
  EXPECT_NEAR(turbulence_sigma(10.0, TurbulenceClass::C), 0.12 * (0.75 * 10.0 + 5.6), 1e-12);
  EXPECT_EQ(parse_turbulence_class("B"), TurbulenceClass::B);
  EXPECT_THROW(parse_turbulence_class("D"), ConfigError);
}

TEST(Turbulence, KaimalSpectrumIntegratesToVariance) {
  const double v0 = 12.0, sigma = 2.0;
  // Substitution u = ln f keeps the quadrature accurate over many decades.
  double integral = 0.0;
  const double lo = std::log(1e-7), hi = std::log(1e5);
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  for (int i = 0; i < steps; ++i) {
    const double f = std::exp(lo + (i + 0.5) * h);
    integral += kaimal_psd(f, v0, sigma) * f * h;
  }
  EXPECT_NEAR(integral, sigma * sigma, 1e-3 * sigma * sigma);
}

TEST(Synthesis, VarianceMatchesTurbulenceIntensity) {
  for (double v0 : {8.0, 18.0}) {
    const double s2 = std::pow(turbulence_sigma(v0, TurbulenceClass::A), 2);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto w = synthesize_wind(v0, TurbulenceClass::A, 3600.0, 0.05, seed);
      EXPECT_NEAR(variance(w.samples), s2, 0.10 * s2) << "v0 " << v0 << " seed " << seed;
    }
  }
}

TEST(Synthesis, DeterministicPerSeed) {
  const auto a = synthesize_wind(14.0, TurbulenceClass::A, 600.0, 0.05, 7);
  const auto b = synthesize_wind(14.0, TurbulenceClass::A, 600.0, 0.05, 7);
  const auto c = synthesize_wind(14.0, TurbulenceClass::A, 600.0, 0.05, 8);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Synthesis, SampleMeanNearNominal) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto w = synthesize_wind(10.0, TurbulenceClass::A, 600.0, 0.05, seed);
    EXPECT_NEAR(w.sample_mean(), 10.0, 0.02 * 10.0);
  }
}

TEST(Synthesis, PsdFollowsKaimalWithin3dB) {
  const double v0 = 18.0, fs = 20.0;
  const double sigma = turbulence_sigma(v0, TurbulenceClass::A);
  std::vector<double> est;
  std::vector<double> freq;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    const auto w = synthesize_wind(v0, TurbulenceClass::A, 3600.0, 1.0 / fs, static_cast<std::uint64_t>(s));
    const auto p = psd_welch(w.samples, fs, 400.0);
    if (est.empty()) est.assign(p.density.size(), 0.0), freq = p.freq;
    for (std::size_t k = 0; k < est.size(); ++k) est[k] += p.density[k] / seeds;
  }
  // Log-spaced bands of ratio 1.5 cover [0.005, 1] Hz.
  for (double lo = 0.005; lo < 1.0; lo *= 1.5) {
    const double hi = std::min(1.0, lo * 1.5);
    double e = 0.0, t = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < freq.size(); ++k) {
      if (freq[k] < lo || freq[k] >= hi) continue;
      e += est[k];
      t += kaimal_psd(freq[k], v0, sigma);
      ++count;
    }
    ASSERT_GT(count, 0);
    EXPECT_LE(std::abs(10.0 * std::log10(e / t)), 3.0) << "band " << lo << "-" << hi << " Hz";
  }
}

TEST(Synthesis, RejectsCoarseStepAndShortRecords) {
  EXPECT_THROW(synthesize_wind(10.0, TurbulenceClass::A, 600.0, 0.2, 1), DomainError);
  EXPECT_THROW(synthesize_wind(10.0, TurbulenceClass::A, 100.0, 0.05, 1), DomainError);
  EXPECT_THROW(synthesize_wind(-1.0, TurbulenceClass::A, 600.0, 0.05, 1), DomainError);
}

TEST(Synthesis, NoClampingAboveEightMetresPerSecond) {
  for (double v0 : {8.0, 12.0, 18.0, 24.0})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto w = synthesize_wind(v0, TurbulenceClass::A, 3600.0, 0.05, seed);
      EXPECT_EQ(w.clamp_count, 0);
      for (double v : w.samples) ASSERT_GT(v, 0.0);
    }
}

TEST(Synthesis, HalfRecordMeansAgreeWithSpectralSpread) {
  // The half-record mean difference is Gaussian with the variance implied by
  // the synthesized spectrum; its RMS z-score over 20 seeds lies inside the
  // 99.9 % chi-square band.
  for (double v0 : {8.0, 18.0}) {
    const double sd = std::sqrt(window_mean_variance(v0, 3600.0, 0.05, 1800.0, true));
    double z2 = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto w = synthesize_wind(v0, TurbulenceClass::A, 3600.0, 0.05, seed);
      const std::size_t h = w.samples.size() / 2;
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < h; ++i) m1 += w.samples[i], m2 += w.samples[h + i];
      z2 += std::pow((m2 - m1) / static_cast<double>(h) / sd, 2);
    }
    const double rms = std::sqrt(z2 / 20.0);
    EXPECT_GT(rms, 0.5) << v0;
    EXPECT_LT(rms, 1.5) << v0;
  }
}

TEST(Synthesis, VarianceStableAcrossSeeds) {
  std::vector<double> vars;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    vars.push_back(variance(synthesize_wind(12.0, TurbulenceClass::A, 1200.0, 0.05, seed).samples));
  double m = 0.0;
  for (double v : vars) m += v;
  m /= 20.0;
  double s = 0.0;
  for (double v : vars) s += (v - m) * (v - m);
  EXPECT_LT(std::sqrt(s / 20.0) / m, 0.25);
}

TEST(WindSeries, PeriodicInterpolation) {
  WindSeries w;
  w.dt = 1.0;
  w.samples = {1.0, 3.0, 5.0};
  EXPECT_DOUBLE_EQ(w.duration(), 3.0);
  EXPECT_DOUBLE_EQ(w.at(0.5), 2.0);
  EXPECT_DOUBLE_EQ(w.at(2.5), 3.0);  // wraps toward the first sample
  EXPECT_THROW(w.at(3.5), EndOfDataError);
}

TEST(CumulativeMean, ConstantSeries) {
  WindSeries w;
  w.dt = 0.05;
  w.samples.assign(4000, 11.0);
  for (double t : {0.05, 0.123, 10.0, 200.0}) EXPECT_NEAR(cumulative_mean(w, t), 11.0, 1e-12);
}

TEST(CumulativeMean, FullRecordEqualsSampleMean) {
  const auto w = synthesize_wind(15.0, TurbulenceClass::A, 600.0, 0.05, 3);
  EXPECT_NEAR(cumulative_mean(w, w.duration()), w.sample_mean(), 1e-10);
  EXPECT_THROW(cumulative_mean(w, 0.0), DomainError);
  EXPECT_THROW(cumulative_mean(w, w.duration() + 1.0), DomainError);
}

TEST(CumulativeMean, SixHundredSecondMeanAgreesWithSpectralSpread) {
  for (double v0 : {8.0, 18.0}) {
    const double sd = std::sqrt(window_mean_variance(v0, 3600.0, 0.05, 600.0, false));
    double z2 = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto w = synthesize_wind(v0, TurbulenceClass::A, 3600.0, 0.05, seed);
      z2 += std::pow((cumulative_mean(w, 600.0) - v0) / sd, 2);
    }
    const double rms = std::sqrt(z2 / 20.0);
    EXPECT_GT(rms, 0.5) << v0;
    EXPECT_LT(rms, 1.5) << v0;
  }
}

TEST(Weibull, WeightsNormalised) {
  const WeibullSpec spec;
  EXPECT_DOUBLE_EQ(weibull_weights({12.0}, spec)[0], 1.0);
  const auto w = weibull_weights({8, 10, 12, 14, 16, 18, 20, 22, 24}, spec);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_GT(w[0], w[1]);  // 8 m/s bin is closest to the mode
}

TEST(Weibull, ModeFormulaAndEqualDensityWeights) {
  const WeibullSpec spec;
  EXPECT_NEAR(spec.mode(), 9.0 * std::sqrt(0.5), 1e-12);
  double best = 0.0, arg = 0.0;
  for (int i = 1; i < 3000; ++i) {
    const double v = 0.01 * i;
    if (spec.pdf(v) > best) best = spec.pdf(v), arg = v;
  }
  EXPECT_NEAR(arg, spec.mode(), 0.01);
  // Equal pdf values give equal weights.
  const double m = spec.mode();
  const double lo = m - 1.0;
  double hi = m + 0.5, step = 0.5;
  for (int i = 0; i < 200; ++i) {
    hi += (spec.pdf(hi) > spec.pdf(lo) ? step : -step);
    step *= 0.5;
  }
  const auto w = weibull_weights({lo, hi}, spec);
  EXPECT_NEAR(w[0], w[1], 1e-9);
}

TEST(Weibull, RejectsBadInput) {
  EXPECT_THROW(weibull_weights({}, WeibullSpec{}), DomainError);
  EXPECT_THROW(weibull_weights({10.0, 8.0}, WeibullSpec{}), DomainError);
  EXPECT_THROW(weibull_weights({10.0}, WeibullSpec{-1.0, 9.0}), DomainError);
}

TEST(WindCsv, RoundTrip) {
  const auto w = synthesize_wind(9.0, TurbulenceClass::B, 200.0, 0.1, 42);
  std::stringstream a;
  write_wind_csv(w, a);
  const auto r = read_wind_csv(a);
  EXPECT_EQ(r.samples, w.samples);
  EXPECT_DOUBLE_EQ(r.dt, w.dt);
  EXPECT_DOUBLE_EQ(r.mean_speed, 9.0);
  EXPECT_EQ(r.seed, 42u);
  std::stringstream b;
  write_wind_csv(r, b);
  EXPECT_EQ(a.str(), b.str());
}
