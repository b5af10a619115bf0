#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "torsim/metrics.hpp"
#include "torsim/sim.hpp"
#include "torsim/wind.hpp"

using namespace torsim;

namespace {

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

std::vector<Cycle> sorted(std::vector<Cycle> c) {
  std::sort(c.begin(), c.end(), [](const Cycle& a, const Cycle& b) {
    return std::tie(a.count, a.range, a.mean) < std::tie(b.count, b.range, b.mean);
  });
  return c;
}

std::vector<Cycle> full_cycles(const CycleSet& c) {
  std::vector<Cycle> out;
  for (const auto& x : c)
    if (x.count == 1.0) out.push_back(x);
  return sorted(out);
}

}  // namespace

// --- rainflow ---------------------------------------------------------------

TEST(Rainflow, ReversalSequenceFixture) {
  const CycleSet got = rainflow({-2, 1, -3, 5, -1, 3, -4, 4, -2});
  const CycleSet expected{
      {4.0, 1.0, 1.0},                                                       // −1 → 3 closed by −4
      {3.0, -0.5, 0.5}, {4.0, -1.0, 0.5}, {8.0, 1.0, 0.5}, {9.0, 0.5, 0.5},  // residue
      {8.0, 0.0, 0.5},  {6.0, 1.0, 0.5}};
  EXPECT_EQ(got, expected);
}

TEST(Rainflow, TurningPointsCollapsePlateausAndMonotoneRuns) {
  EXPECT_EQ(turning_points({0, 1, 2, 2, 3, 1, 1, 0, 4}), (std::vector<double>{0, 3, 0, 4}));
  EXPECT_EQ(turning_points({5, 5, 5}), (std::vector<double>{5}));
}

TEST(Rainflow, ConstantSeriesHasNoCycles) {
  EXPECT_TRUE(rainflow({2.0, 2.0, 2.0, 2.0}).empty());
  EXPECT_THROW(rainflow({1.0}), DomainError);
}

TEST(Rainflow, MonotoneRampIsOneHalfCycle) {
  std::vector<double> x;
  for (int i = 0; i <= 50; ++i) x.push_back(0.2 * i - 3.0);
  const CycleSet c = rainflow(x);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].range, 10.0);
  EXPECT_DOUBLE_EQ(c[0].count, 0.5);
}

TEST(Rainflow, SinusoidPeriodsBecomeCycles) {
  const double amp = 1.5;
  for (int k : {1, 3, 10}) {
    std::vector<double> x;
    const int per = 64;
    for (int i = 0; i <= k * per; ++i) x.push_back(amp * std::sin(2.0 * std::numbers::pi * i / per));
    const CycleSet c = rainflow(x);
    double counted = 0.0;
    int closed = 0;
    for (const auto& cy : c) {
      if (std::abs(cy.range - 2.0 * amp) < 1e-9) {
        counted += cy.count;
        if (cy.count == 1.0) ++closed;
      }
    }
    EXPECT_EQ(closed, k - 1) << k;
    EXPECT_NEAR(counted, k, 0.5 + 1e-12) << k;
  }
}

TEST(Rainflow, SplittingAtNonExtremumKeepsClosedCycles) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = random_series(rng, 400);
    // Insert a strictly monotone point between samples 199 and 200.
    const std::size_t k = 200;
    x.insert(x.begin() + k, 0.5 * (x[k - 1] + x[k]));
    const std::vector<double> a(x.begin(), x.begin() + k + 1), b(x.begin() + k, x.end());
    const auto whole = full_cycles(rainflow(x));
    auto parts = full_cycles(rainflow(a));
    const auto pb = full_cycles(rainflow(b));
    parts.insert(parts.end(), pb.begin(), pb.end());
    parts = sorted(parts);
    EXPECT_TRUE(std::includes(whole.begin(), whole.end(), parts.begin(), parts.end(), [](const Cycle& l, const Cycle& r) {
      return std::tie(l.count, l.range, l.mean) < std::tie(r.count, r.range, r.mean);
    })) << trial;
  }
}

// --- DEL --------------------------------------------------------------------

TEST(Del, KnownArithmetic) {
  EXPECT_NEAR(damage_equivalent_load({{3.0, 0.0, 1.0}, {4.0, 0.0, 1.0}}, 4.0, 1.0), 4.285, 1e-3);
  EXPECT_NEAR(damage_equivalent_load({{3.0, 0.0, 1.0}, {4.0, 0.0, 1.0}}, 4.0, 1.0), std::pow(337.0, 0.25), 1e-12);
  EXPECT_DOUBLE_EQ(damage_equivalent_load({{7.0, 0.0, 1.0}}, 4.0, 1.0), 7.0);
  EXPECT_EQ(damage_equivalent_load({}, 4.0, 1.0), 0.0);
  EXPECT_THROW(damage_equivalent_load({{1.0, 0.0, 1.0}}, 0.5, 1.0), DomainError);
  EXPECT_THROW(damage_equivalent_load({{1.0, 0.0, 1.0}}, 4.0, 0.0), DomainError);
}

TEST(Del, HalfCyclesCountHalf) {
  const double full = damage_equivalent_load({{2.0, 0.0, 1.0}}, 4.0, 1.0);
  const double two_halves = damage_equivalent_load({{2.0, 0.0, 0.5}, {2.0, 0.0, 0.5}}, 4.0, 1.0);
  EXPECT_NEAR(full, two_halves, 1e-15);
}

TEST(Del, HomogeneityOverRandomSeries) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.1, 50.0);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_series(rng, 300);
    const double c = scale(rng);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = c * x[k];
    for (double m : {4.0, 10.0}) {
      const double dx = damage_equivalent_load(rainflow(x), m, 2e6);
      const double dy = damage_equivalent_load(rainflow(y), m, 2e6);
      ASSERT_NEAR(dy, c * dx, 1e-11 * c * dx) << i;
    }
  }
}

TEST(Del, MonotoneInAddedCycles) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> r(0.01, 5.0);
  CycleSet c{{1.0, 0.0, 1.0}};
  double prev = damage_equivalent_load(c, 4.0, 2e6);
  for (int i = 0; i < 200; ++i) {
    c.push_back({r(rng), 0.0, i % 2 ? 1.0 : 0.5});
    const double d = damage_equivalent_load(c, 4.0, 2e6);
    ASSERT_GT(d, prev);
    prev = d;
  }
}

TEST(Del, LargeExponentStaysFinite) {
  const double d = damage_equivalent_load({{1e7, 0.0, 1.0}, {5e6, 0.0, 1.0}}, 10.0, 2e6);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_NEAR(d, 1e7 * std::pow((1.0 + std::pow(0.5, 10.0)) / 2e6, 0.1), 1e-6);
}

// --- PSD --------------------------------------------------------------------

TEST(Welch, WhiteNoiseLevel) {
  std::mt19937_64 rng(2);
  const double fs = 10.0;
  const auto x = random_series(rng, 200000);
  const Spectrum s = psd_welch(x, fs, 20.0);
  const double level = 1.0 / (fs / 2.0);
  for (std::size_t k = 1; k + 1 < s.density.size(); ++k) ASSERT_NEAR(s.density[k], level, 0.2 * level) << k;
  EXPECT_NEAR(s.freq[1], 1.0 / 20.0, 1e-12);
  EXPECT_NEAR(s.freq.back(), fs / 2.0, 1e-12);
}

TEST(Welch, SinusoidPeak) {
  const double fs = 10.0, f0 = 0.5;
  std::vector<double> x(20000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs);
  const Spectrum s = psd_welch(x, fs, 100.0);
  const auto peak = static_cast<std::size_t>(std::max_element(s.density.begin(), s.density.end()) - s.density.begin());
  EXPECT_NEAR(s.freq[peak], f0, 1e-12);
  // Outside the Hann main lobe (±2 bins).
  for (std::size_t k = 0; k < s.density.size(); ++k)
    if (k + 3 <= peak || k >= peak + 3) ASSERT_LT(10.0 * std::log10(s.density[k] / s.density[peak]), -20.0) << k;
}

TEST(Welch, ParsevalOnTurbulentWind) {
  const WindSeries w = synthesize_wind(18.0, TurbulenceClass::A, 3600.0, 0.05, 3);
  const double fs = 1.0 / w.dt, seg = 600.0;
  const Spectrum s = psd_welch(w.samples, fs, seg);
  double integral = 0.0;
  const double df = s.freq[1] - s.freq[0];
  for (double d : s.density) integral += d * df;
  // Per-segment variance is what Welch sees after segment mean removal.
  const auto n = static_cast<std::size_t>(std::llround(seg * fs));
  double seg_var = 0.0;
  int count = 0;
  for (std::size_t start = 0; start + n <= w.samples.size(); start += n / 2, ++count) {
    const std::vector<double> part(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                   w.samples.begin() + static_cast<std::ptrdiff_t>(start + n));
    seg_var += std::pow(std_of(part), 2);
  }
  seg_var /= count;
  EXPECT_NEAR(integral, seg_var, 0.05 * seg_var);
}

TEST(Welch, RejectsShortInput) {
  EXPECT_THROW(psd_welch(std::vector<double>(100, 1.0), 10.0, 20.0), DomainError);
  EXPECT_THROW(psd_welch(std::vector<double>(1000, 1.0), 0.0, 20.0), DomainError);
  EXPECT_NO_THROW(psd_welch(std::vector<double>(300, 1.0), 10.0, 20.0));
}

TEST(Decimate, BlockMean) {
  EXPECT_EQ(decimate({1, 3, 5, 7, 9}, 2), (std::vector<double>{2, 6}));
  EXPECT_EQ(decimate({1, 2}, 1), (std::vector<double>{1, 2}));
  EXPECT_THROW(decimate({1, 2}, 0), DomainError);
}

// --- actuation --------------------------------------------------------------

TEST(Ctr, ConstantRampAndSinusoid) {
  EXPECT_EQ(control_torque_rate(std::vector<double>(50, 4e6), 0.1), 0.0);
  std::vector<double> ramp;
  for (int i = 0; i <= 100; ++i) ramp.push_back(3.0 * 0.1 * i);
  EXPECT_NEAR(control_torque_rate(ramp, 0.1), 3.0, 1e-12);
  const double a = 2.0e5, f = 0.2, fs = 100.0 * f;
  std::vector<double> sine;
  for (int i = 0; i <= 10 * 100; ++i) sine.push_back(a * std::sin(2.0 * std::numbers::pi * f * i / fs));
  const double ref = 2.0 * std::numbers::pi * f * a / std::numbers::sqrt2;
  EXPECT_NEAR(control_torque_rate(sine, 1.0 / fs), ref, 0.01 * ref);
}

TEST(PitchTravel, ConstantRampAndTriangle) {
  EXPECT_EQ(pitch_travel(std::vector<double>(10, 0.2)), 0.0);
  std::vector<double> ramp;
  const double ten = 10.0 * std::numbers::pi / 180.0;
  for (int i = 0; i <= 40; ++i) ramp.push_back(ten * i / 40.0);
  EXPECT_NEAR(pitch_travel(ramp), ten, 1e-15);
  const double amp = 0.05;
  const int k = 7, per = 40;
  std::vector<double> tri;
  for (int i = 0; i <= k * per; ++i) {
    const double ph = static_cast<double>(i % per) / per;
    tri.push_back(amp * (ph < 0.25 ? 4 * ph : ph < 0.75 ? 2 - 4 * ph : 4 * ph - 4));
  }
  EXPECT_NEAR(pitch_travel(tri), 4.0 * amp * k, 1e-12);
}

TEST(Statistics, MeanStdRms) {
  EXPECT_DOUBLE_EQ(mean_of({1, 2, 3, 4}), 2.5);
  EXPECT_DOUBLE_EQ(std_of({1, 3}), 1.0);
  EXPECT_DOUBLE_EQ(rms_of({3, -3}), 3.0);
  EXPECT_EQ(mean_of({}), 0.0);
}

// --- reports ----------------------------------------------------------------

TEST(Report, LifetimeAggregation) {
  MetricsReport a, b;
  a.DEL_MyT = 100.0;
  b.DEL_MyT = 200.0;
  a.P_mean = 1.0;
  b.P_mean = 1.0;
  const MetricsReport l = lifetime_aggregate({{8.0, a}, {18.0, b}}, {0.25, 0.75});
  EXPECT_DOUBLE_EQ(l.DEL_MyT, 175.0);
  EXPECT_DOUBLE_EQ(l.P_mean, 1.0);
  const MetricsReport one = lifetime_aggregate({{8.0, a}}, {1.0});
  EXPECT_EQ(one.values(), a.values());
  EXPECT_THROW(lifetime_aggregate({{8.0, a}}, {1.0, 2.0}), DomainError);
  EXPECT_THROW(lifetime_aggregate({{8.0, a}}, {0.0}), DomainError);
}

TEST(Report, PercentVersusBaseline) {
  MetricsReport bl = MetricsReport::from_values({100, 100, 100, 100, 100, 100, 100, 100, 100});
  MetricsReport x = MetricsReport::from_values({80, 120, 100, 50, 100, 100, 105, 90, 0});
  const auto p = percent_vs_baseline(x, bl);
  EXPECT_DOUBLE_EQ(p[0], 20.0);
  EXPECT_DOUBLE_EQ(p[1], -20.0);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
  EXPECT_DOUBLE_EQ(p[3], 50.0);
  EXPECT_DOUBLE_EQ(p[6], 5.0);  // higher mean power is an improvement
  EXPECT_DOUBLE_EQ(p[8], 100.0);
  for (double v : percent_vs_baseline(bl, bl)) EXPECT_EQ(v, 0.0);
}

TEST(Report, MeanAndConsistency) {
  const MetricsReport a = MetricsReport::from_values({1, 2, 3, 4, 5, 6, 7, 8, 9});
  const MetricsReport b = MetricsReport::from_values({3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(mean_report({a, b}).values(), (std::vector<double>{2, 3, 4, 5, 6, 7, 8, 9, 10}));
  EXPECT_THROW(mean_report({}), DomainError);
  const TurbineParams p{};
  EXPECT_TRUE(a.consistent(p));
  MetricsReport big = a;
  big.P_mean = 1.1 * p.rated_mechanical_power();
  EXPECT_FALSE(big.consistent(p));
  MetricsReport neg = a;
  neg.CTR = -1.0;
  EXPECT_FALSE(neg.consistent(p));
  EXPECT_THROW(MetricsReport::from_values({1, 2}), DomainError);
}

TEST(Report, ComputedOnSimulationLog) {
  SimConfig cfg;
  cfg.duration = 300.0;
  const SimResult r = run(cfg);
  const MetricsReport m = compute_metrics(r.log, cfg.warmup, cfg.Ts_ctrl, cfg.turbine);
  EXPECT_TRUE(m.consistent(cfg.turbine));
  for (double v : m.values()) EXPECT_GT(v, 0.0);
  // Tip-speed-ratio spread recomputed from the logged channels.
  const auto om = window_after(r.log, SimLog::kRotorSpeed, cfg.warmup);
  const auto v = window_after(r.log, SimLog::kWind, cfg.warmup);
  std::vector<double> lam;
  for (std::size_t i = 0; i < om.size(); ++i) lam.push_back(om[i] * 63.0 / v[i]);
  EXPECT_NEAR(m.std_lambda, std_of(lam), 1e-12 * std_of(lam));
  // Same value after a CSV round trip of the log.
  std::stringstream ss;
  r.log.write_csv(ss);
  const SimLog back = SimLog::read_csv(ss);
  const MetricsReport m2 = compute_metrics(back, cfg.warmup, cfg.Ts_ctrl, cfg.turbine);
  EXPECT_EQ(m.values(), m2.values());
  EXPECT_THROW(compute_metrics(r.log, 1e6, cfg.Ts_ctrl, cfg.turbine), DomainError);
}

TEST(Report, CsvRowsRoundTrip) {
  const MetricsReport a = MetricsReport::from_values({1.0 / 3.0, 2e7, 3.5, 4, 5, 6, 7, 8, 9});
  std::stringstream ss;
  write_metrics_header(ss, {"controller"});
  write_metrics_row(ss, {"EOR"}, a);
  const auto path = std::filesystem::temp_directory_path() / "torsim_metrics_rt.csv";
  {
    std::ofstream f(path);
    f << ss.str();
  }
  const CsvTable t = CsvTable::read(path.string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.header.front(), "controller");
  EXPECT_EQ(t.rows[0][0], "EOR");
  std::vector<double> vals;
  for (std::size_t i = 1; i < t.rows[0].size(); ++i) vals.push_back(std::stod(t.rows[0][i]));
  EXPECT_EQ(vals, a.values());
  EXPECT_EQ(t.column("PT"), 9);
  EXPECT_THROW(t.column("nope"), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(CsvTable::read("/nonexistent_torsim.csv"), IoError);
}

TEST(Report, MetricsConfigValidation) {
  EXPECT_NO_THROW(MetricsConfig::from_config(KeyValueConfig::parse("wohler_blade = 12\n")));
  EXPECT_THROW(MetricsConfig::from_config(KeyValueConfig::parse("wohler_tower = 0.5\n")), ConfigError);
  EXPECT_THROW(MetricsConfig::from_config(KeyValueConfig::parse("psd_decimation = 0\n")), ConfigError);
  EXPECT_THROW(MetricsConfig::from_config(KeyValueConfig::parse("weibull_scale = -1\n")), ConfigError);
}
