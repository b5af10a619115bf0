#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "torsim/config.hpp"
#include "torsim/controllers.hpp"
#include "torsim/errors.hpp"
#include "torsim/exosystem.hpp"
#include "torsim/lidar.hpp"
#include "torsim/linear_model.hpp"
#include "torsim/plant.hpp"
#include "torsim/turbine_params.hpp"
#include "torsim/wind.hpp"

namespace torsim {

struct SimConfig {
  double v0 = 18.0;
  double duration = 3700.0;
  double dt_phys = 0.0125;
  double Ts_ctrl = 0.1;
  ControllerKind controller = ControllerKind::EOR;
  std::uint64_t seed = 1;
  double warmup = 100.0;
  TurbulenceClass wind_class = TurbulenceClass::A;
  double wind_dt = 0.05;
  LidarConfig lidar;
  TurbineParams turbine;

  double baseline_kp = 0.4174;   // rad per rad/s, ω_n = 0.6 rad/s, ζ = 0.7 at 18 m/s
  double baseline_ki = 0.2759;   // rad per rad
  SynthesisWeights weights;
  int rls_order = 2;
  double rls_forgetting = 0.9;
  double rls_p0 = 1e3;
  double exo_refresh = 6.0;  // s

  /// Optional externally supplied wind; synthesized from (v0, class, seed) when empty.
  std::optional<WindSeries> wind;

  int steps_per_tick() const { return static_cast<int>(std::llround(Ts_ctrl / dt_phys)); }

  void validate() const {
    turbine.validate();
    if (!(v0 >= turbine.cut_in && v0 <= turbine.cut_out)) throw ConfigError("v0", "outside [cut_in, cut_out]");
    if (!(dt_phys > 0.0)) throw ConfigError("dt_phys", "must be positive");
    if (!(Ts_ctrl > 0.0)) throw ConfigError("Ts_ctrl", "must be positive");
    if (std::abs(Ts_ctrl / dt_phys - steps_per_tick()) > 1e-9 || steps_per_tick() < 1)
      throw ConfigError("Ts_ctrl", "must be an integer multiple of dt_phys");
    if (!(warmup >= 0.0 && warmup < duration)) throw ConfigError("warmup", "need 0 <= warmup < duration");
    if (!(wind_dt > 0.0 && wind_dt <= 0.1)) throw ConfigError("wind_dt", "need 0 < wind_dt <= 0.1");
    if (rls_order < 1) throw ConfigError("rls_order", "must be at least 1");
    if (!(rls_forgetting > 0.0 && rls_forgetting <= 1.0)) throw ConfigError("rls_forgetting", "must be in (0, 1]");
    if (!(rls_p0 > 0.0)) throw ConfigError("rls_p0", "must be positive");
    if (!(exo_refresh >= Ts_ctrl)) throw ConfigError("exo_refresh", "must be at least Ts_ctrl");
    if (!(weights.r_region2 > 0.0)) throw ConfigError("lqr_r_region2", "must be positive");
    if (!(weights.r_region3 > 0.0)) throw ConfigError("lqr_r_region3", "must be positive");
    if (!(weights.rotor_speed_weight_region3 >= 0.0))
      throw ConfigError("lqr_rotor_speed_weight_region3", "must be non-negative");
    if (!(weights.process_noise > 0.0)) throw ConfigError("kalman_process_noise", "must be positive");
    if (!(weights.measurement_noise > 0.0)) throw ConfigError("kalman_measurement_noise", "must be positive");
    lidar.validate(turbine.cut_out);
  }

  /// Reads simulation and turbine keys; turbine keys are named after the
  /// TurbineParams fields.
  static SimConfig from_config(const KeyValueConfig& cfg) {
    SimConfig c;
    c.turbine = TurbineParams::from_config(cfg);
    c.v0 = cfg.get_double("v0", c.v0);
    c.duration = cfg.get_double("duration", c.duration);
    c.dt_phys = cfg.get_double("dt_phys", c.dt_phys);
    c.Ts_ctrl = cfg.get_double("Ts_ctrl", c.Ts_ctrl);
    c.controller = parse_controller(cfg.get_string("controller", to_string(c.controller)));
    const auto seed = cfg.get_int("seed", static_cast<std::int64_t>(c.seed));
    if (seed < 0) throw ConfigError("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.warmup = cfg.get_double("warmup", c.warmup);
    c.wind_class = parse_turbulence_class(cfg.get_string("wind_class", "A"));
    c.wind_dt = cfg.get_double("wind_dt", c.wind_dt);
    c.lidar.focal_distance = cfg.get_double("lidar_focal_distance", c.lidar.focal_distance);
    c.lidar.preview_horizon = cfg.get_double("lidar_preview_horizon", c.lidar.preview_horizon);
    c.lidar.scan_points = static_cast<int>(cfg.get_int("lidar_scan_points", c.lidar.scan_points));
    c.lidar.measurement_noise = cfg.get_double("lidar_measurement_noise", 0.0);
    c.lidar.wind_evolution = cfg.get_double("lidar_wind_evolution", 0.0);
    c.baseline_kp = cfg.get_double("baseline_kp", c.baseline_kp);
    c.baseline_ki = cfg.get_double("baseline_ki", c.baseline_ki);
    c.weights.r_region2 = cfg.get_double("lqr_r_region2", c.weights.r_region2);
    c.weights.r_region3 = cfg.get_double("lqr_r_region3", c.weights.r_region3);
    c.weights.rotor_speed_weight_region3 =
        cfg.get_double("lqr_rotor_speed_weight_region3", c.weights.rotor_speed_weight_region3);
    c.weights.process_noise = cfg.get_double("kalman_process_noise", c.weights.process_noise);
    c.weights.measurement_noise = cfg.get_double("kalman_measurement_noise", c.weights.measurement_noise);
    c.rls_order = static_cast<int>(cfg.get_int("rls_order", c.rls_order));
    c.rls_forgetting = cfg.get_double("rls_forgetting", c.rls_forgetting);
    c.rls_p0 = cfg.get_double("rls_p0", c.rls_p0);
    c.exo_refresh = cfg.get_double("exo_refresh", c.exo_refresh);
    return c;
  }
};

/// Channel-complete time history on the physics time base.
class SimLog {
 public:
  enum Channel : int {
    kTime, kWind, kPreview, kRotorSpeed, kGenSpeed, kTorsion, kPitch, kPitchRate, kTowerDisp, kTowerVel,
    kGenTorque, kPitchCommand, kPower, kShaftTorque, kTowerMoment, kBladeMoment, kError, kA1, kA2, kA3,
    kChannelCount
  };

  static const std::array<const char*, kChannelCount>& names() {
    static const std::array<const char*, kChannelCount> n{
        "time_s", "v_x", "v_preview", "Omega_r", "Omega_g", "phi", "theta", "theta_dot", "x_T", "x_T_dot",
        "M_g", "theta_c", "P_mech", "LSS_torque", "M_yT", "M_yB", "e", "a1", "a2", "a3"};
    return n;
  }

  static int index_of(const std::string& name) {
    for (int i = 0; i < kChannelCount; ++i)
      if (name == names()[i]) return i;
    throw DomainError("unknown channel '" + name + "'");
  }

  void reserve(std::size_t rows) {
    for (auto& c : data_) c.reserve(rows);
  }

  void append(const std::array<double, kChannelCount>& row) {
    for (int i = 0; i < kChannelCount; ++i) data_[i].push_back(row[i]);
  }

  std::size_t size() const { return data_[0].size(); }
  const std::vector<double>& channel(int c) const { return data_.at(c); }
  const std::vector<double>& channel(const std::string& name) const { return data_.at(index_of(name)); }
  double dt() const { return size() > 1 ? data_[kTime][1] - data_[kTime][0] : 0.0; }

  bool all_finite() const {
    for (const auto& c : data_)
      for (double v : c)
        if (!std::isfinite(v)) return false;
    return true;
  }

  void write_csv(std::ostream& out) const {
    for (int i = 0; i < kChannelCount; ++i) out << (i ? "," : "") << names()[i];
    out << "\n" << std::setprecision(17);
    for (std::size_t r = 0; r < size(); ++r) {
      for (int i = 0; i < kChannelCount; ++i) out << (i ? "," : "") << data_[i][r];
      out << "\n";
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write log '" + path + "'");
    write_csv(f);
    if (!f) throw IoError("failed writing log '" + path + "'");
  }

  static SimLog read_csv(std::istream& in) {
    SimLog log;
    std::string line;
    if (!std::getline(in, line)) throw IoError("log CSV: empty file");
    {
      std::istringstream hdr(line);
      std::string name;
      int i = 0;
      while (std::getline(hdr, name, ',')) {
        if (i >= kChannelCount || name != names()[i]) throw IoError("log CSV: unexpected column '" + name + "'");
        ++i;
      }
      if (i != kChannelCount) throw IoError("log CSV: missing columns");
    }
    std::array<double, kChannelCount> row{};
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string cell;
      int i = 0;
      while (std::getline(ss, cell, ',')) {
        if (i >= kChannelCount) throw IoError("log CSV: too many cells");
        try {
          row[i++] = std::stod(cell);
        } catch (const std::exception&) {
          throw IoError("log CSV: bad number '" + cell + "'");
        }
      }
      if (i != kChannelCount) throw IoError("log CSV: short row");
      log.append(row);
    }
    return log;
  }

  static SimLog read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open log '" + path + "'");
    return read_csv(f);
  }

 private:
  std::array<std::vector<double>, kChannelCount> data_;
};

/// Counters and synthesis outcomes attached to a run.
struct SimMeta {
  Region region = Region::Region2;
  double anchor_wind = 0.0;
  double mean_wind = 0.0;
  double end_time = 0.0;
  bool truncated = false;
  bool stalled = false;
  std::string note;
  SaturationCounters saturation;
  std::int64_t controller_faults = 0;
  std::int64_t apparent_wind_clamps = 0;
  std::int64_t wind_sample_clamps = 0;
  std::int64_t rls_resets = 0;
  std::int64_t regulator_refreshes = 0;
  std::int64_t regulator_infeasible = 0;
  std::int64_t regulator_failures = 0;
  double feedback_radius = 0.0;
  double observer_radius = 0.0;
  double max_residual_dyn = 0.0;
  double max_residual_out = 0.0;
};

/// Synthesized gains at the end of a run, for inspection and diffing.
struct GainSnapshot {
  Eigen::MatrixXd F, K_A, G, Pi, Gamma, S, G_d;
  Eigen::VectorXd x_star, u_star;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;

  void write(std::ostream& out) const {
    const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "\n", "  [", "]");
    auto put = [&](const char* name, const Eigen::MatrixXd& m) {
      out << name << " (" << m.rows() << "x" << m.cols() << ")\n";
      if (m.size()) out << m.format(fmt) << "\n";
    };
    out << std::setprecision(17) << "gamma = " << gamma << "\nalpha = " << alpha << "\nbeta = " << beta << "\n";
    put("x_star", x_star.transpose());
    put("u_star", u_star.transpose());
    put("F", F);
    put("K_A", K_A);
    put("S", S);
    put("Pi", Pi);
    put("Gamma", Gamma);
    put("G", G);
    put("G_d", G_d);
  }
};

struct SimResult {
  SimLog log;
  SimMeta meta;
  GainSnapshot gains;
};

namespace detail {

inline Eigen::VectorXd measured_output(const PlantState& s, const LinearModel& m) {
  Eigen::VectorXd y(m.outputs());
  if (m.region == Region::Region2) {
    y << s.rotor_speed - m.x_star(0), s.generator_speed - m.x_star(2);
  } else {
    y << s.rotor_speed - m.x_star(0), s.generator_speed - m.x_star(2), s.pitch - m.x_star(3);
  }
  return y;
}

inline Eigen::VectorXd homogenised_state(const PlantState& s, const LinearModel& m) {
  Eigen::VectorXd x(m.states());
  if (m.region == Region::Region2) {
    x << s.rotor_speed, s.torsion, s.generator_speed;
  } else {
    x << s.rotor_speed, s.torsion, s.generator_speed, s.pitch, s.pitch_rate;
  }
  return x - m.x_star;
}

/// Observer start from the measured outputs, with the torsion inferred from
/// the last applied torque.
inline Eigen::VectorXd initial_estimate(const Eigen::VectorXd& y_bar, double gen_torque, const LinearModel& m,
                                        const TurbineParams& p) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.states());
  x(0) = y_bar(0);
  x(2) = y_bar(1);
  const double torque_star = m.region == Region::Region2 ? m.u_star(0) : p.rated_gen_torque;
  x(1) = (gen_torque - torque_star) / p.K_d;
  if (m.region == Region::Region3) x(3) = y_bar(2);
  return x;
}

}  // namespace detail

/// Closed-loop simulation of one controller against one wind realization.
inline SimResult run(const SimConfig& cfg) {
  cfg.validate();
  const PlantModel plant(cfg.turbine);
  const auto& tp = cfg.turbine;
  const double T_f = cfg.lidar.preview_time(cfg.v0);
  const int ratio = cfg.steps_per_tick();

  const WindSeries wind = cfg.wind ? *cfg.wind
                                   : synthesize_wind(cfg.v0, cfg.wind_class,
                                                     std::max(200.0, std::ceil(cfg.duration + T_f + 10.0)),
                                                     cfg.wind_dt, cfg.seed);
  const PreviewTrack track(wind, cfg.lidar, cfg.v0);

  SimResult result;
  auto& meta = result.meta;
  auto& log = result.log;
  meta.wind_sample_clamps = wind.clamp_count;

  // Physical start: equilibrium for the nominal mean wind.
  const Equilibrium start = find_equilibrium(plant, cfg.v0);
  PlantState state = start.state;
  ControlInput applied = start.input;
  Region region = start.region;

  BaselineController baseline(tp, cfg.baseline_kp, cfg.baseline_ki);
  baseline.set_trim(start.state.pitch);
  const ActuatorLimits limits = ActuatorLimits::for_turbine(tp);
  RlsEstimator rls(cfg.rls_order, cfg.rls_forgetting, cfg.rls_p0);
  PlantDiagnostics diag;

  bool synthesized = false;
  double anchor = cfg.v0;
  LinearModel design;
  std::optional<EorController> eor;
  std::optional<DacController> dac;
  ExoModel exo;
  long ticks_since_synthesis = 0;
  const long refresh_ticks = std::max<long>(1, std::lround(cfg.exo_refresh / cfg.Ts_ctrl));
  const int q = cfg.rls_order + 1;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(q);
  double error = 0.0;

  auto exo_state = [&](double t) {
    Eigen::VectorXd out(q);
    for (int k = 0; k < q; ++k) out(k) = track.at_rotor(t - k * cfg.Ts_ctrl) - anchor;
    return out;
  };

  auto record_regulator = [&](const RegulatorSolution& r) {
    ++meta.regulator_refreshes;
    if (r.infeasible) ++meta.regulator_infeasible;
    meta.max_residual_dyn = std::max(meta.max_residual_dyn, r.residual_dyn);
    meta.max_residual_out = std::max(meta.max_residual_out, r.residual_out);
  };

  auto synthesize = [&](double t) {
    anchor = cumulative_mean(wind, t);
    const double v_lin = std::clamp(anchor, tp.cut_in, tp.cut_out);
    const Equilibrium eq = find_equilibrium(plant, v_lin);
    const Region new_region = eq.region;
    if (new_region != region) baseline.set_trim(applied.pitch_command);
    region = new_region;
    meta.region = region;
    meta.anchor_wind = anchor;
    design = discretize(linearize(plant, eq), cfg.Ts_ctrl);
    auto& g = result.gains;
    g.x_star = design.x_star;
    g.u_star = design.u_star;
    g.alpha = design.alpha;
    g.beta = design.beta;
    g.gamma = design.gamma;
    if (cfg.controller == ControllerKind::Baseline) return;

    const Eigen::VectorXd y_bar = detail::measured_output(state, design);
    const Eigen::VectorXd x0 = detail::initial_estimate(y_bar, applied.gen_torque, design, tp);
    if (cfg.controller == ControllerKind::EOR) {
      exo = build_exosystem(rls.coefficients(), region, plant, v_lin, cfg.Ts_ctrl);
      eor.emplace(design, exo, cfg.weights);
      eor->set_x_hat(x0);
      record_regulator(eor->regulator());
      meta.feedback_radius = eor->feedback_radius();
      meta.observer_radius = eor->observer_radius();
      g.F = eor->F();
      g.K_A = eor->K_A();
    } else {
      const LinearModel cont = linearize(plant, eq);
      DacGain gain;
      if (region == Region::Region2) {
        const auto [Br, Hr] = rigid_rotor_reduction(cont, tp);
        gain = dac_gain(Br, Hr);
      } else {
        gain = dac_gain(cont.B, cont.H);
      }
      dac.emplace(design, gain, cfg.weights);
      dac->set_x_hat(x0);
      meta.feedback_radius = dac->feedback_radius();
      meta.observer_radius = dac->observer_radius();
      g.F = dac->F();
      g.K_A = dac->K_A();
      g.G_d = gain.G_d;
    }
  };

  const auto total_steps = static_cast<long>(std::llround(cfg.duration / cfg.dt_phys));
  log.reserve(static_cast<std::size_t>(total_steps) + 1);
  const double r_blade = tp.rotor_radius * 2.0 / 3.0;

  for (long i = 0; i <= total_steps; ++i) {
    const double t = static_cast<double>(i) * cfg.dt_phys;
    if (i % ratio == 0) {
      if (t + T_f > track.series().duration() + 1e-9) {
        meta.truncated = true;
        meta.note = "wind preview exhausted; run truncated at t = " + std::to_string(t) + " s";
        break;
      }
      const double reading = track.measure(t);
      rls.update(reading - (synthesized ? anchor : cumulative_mean(wind, std::max(t, wind.dt))));

      if (!synthesized && t >= cfg.warmup - 1e-9) {
        synthesize(t);
        synthesized = true;
        ticks_since_synthesis = 0;
      } else if (synthesized) {
        ++ticks_since_synthesis;
        if (eor && ticks_since_synthesis % refresh_ticks == 0) {
          exo = build_exosystem(rls.coefficients(), region, plant, std::clamp(anchor, tp.cut_in, tp.cut_out),
                                cfg.Ts_ctrl);
          try {
            record_regulator(eor->refresh(exo));
          } catch (const std::exception&) {
            ++meta.regulator_failures;
          }
        }
      }

      const ControlInput fallback = baseline.step(state.rotor_speed, region, cfg.Ts_ctrl);
      ControlInput cmd = fallback;
      if (synthesized) {
        w = exo_state(t);
        const Eigen::VectorXd y_bar = detail::measured_output(state, design);
        const Eigen::VectorXd x_bar = detail::homogenised_state(state, design);
        const double slope = reference_slope(plant, region, std::clamp(anchor, tp.cut_in, tp.cut_out));
        error = (design.C_z * x_bar)(0) - slope * w(0);

        std::optional<Eigen::VectorXd> u_bar;
        if (eor) u_bar = eor->command(w);
        if (dac) u_bar = dac->command(w(0));
        if (u_bar) {
          if (!u_bar->allFinite()) {
            ++meta.controller_faults;
          } else {
            cmd = region == Region::Region2 ? ControlInput{design.u_star(0) + (*u_bar)(0), 0.0}
                                            : ControlInput{torque_ceiling(tp, state.rotor_speed),
                                                           design.u_star(0) + (*u_bar)(0)};
          }
        }
        const ControlInput sat = saturate(cmd, applied, cfg.Ts_ctrl, limits, &meta.saturation);
        Eigen::VectorXd u_applied(1);
        u_applied(0) = region == Region::Region2 ? sat.gen_torque - design.u_star(0)
                                                 : sat.pitch_command - design.u_star(0);
        if (eor) eor->update(u_applied, y_bar, w);
        if (dac) dac->update(u_applied, y_bar, w(0));
        applied = sat;
      } else {
        applied = saturate(cmd, applied, cfg.Ts_ctrl, limits, &meta.saturation);
      }
    }

    const double v = wind.at(t);
    const double v_rel = plant.apparent_wind(state, v);
    const double thrust = plant.aero().thrust(state.rotor_speed, v_rel, state.pitch);
    const Eigen::VectorXd a = rls.coefficients();
    std::array<double, SimLog::kChannelCount> row{};
    row[SimLog::kTime] = t;
    row[SimLog::kWind] = v;
    row[SimLog::kPreview] = track.at_rotor(t);
    row[SimLog::kRotorSpeed] = state.rotor_speed;
    row[SimLog::kGenSpeed] = state.generator_speed;
    row[SimLog::kTorsion] = state.torsion;
    row[SimLog::kPitch] = state.pitch;
    row[SimLog::kPitchRate] = state.pitch_rate;
    row[SimLog::kTowerDisp] = state.tower_disp;
    row[SimLog::kTowerVel] = state.tower_vel;
    row[SimLog::kGenTorque] = applied.gen_torque;
    row[SimLog::kPitchCommand] = applied.pitch_command;
    row[SimLog::kPower] = applied.gen_torque * state.generator_speed;
    row[SimLog::kShaftTorque] = plant.shaft_torque(state);
    row[SimLog::kTowerMoment] = tp.hub_height * thrust;
    row[SimLog::kBladeMoment] = thrust * r_blade / 3.0;
    row[SimLog::kError] = error;
    row[SimLog::kA1] = a.size() > 0 ? a(0) : 0.0;
    row[SimLog::kA2] = a.size() > 1 ? a(1) : 0.0;
    row[SimLog::kA3] = a.size() > 2 ? a(2) : 0.0;
    log.append(row);
    meta.end_time = t;
    if (i == total_steps) break;

    const double vm = wind.at(t + 0.5 * cfg.dt_phys), v1 = wind.at(t + cfg.dt_phys);
    PlantState next;
    bool ok = true;
    try {
      next = plant.rk4_step(state, applied, v, vm, v1, cfg.dt_phys, &diag);
    } catch (const DomainError&) {
      ok = false;
    }
    if (!ok || !next.finite() || !(next.rotor_speed > 0.0) || !(next.generator_speed > 0.0)) {
      meta.stalled = true;
      meta.note = "rotor stalled or state non-finite at t = " + std::to_string(t) + " s";
      break;
    }
    state = next;
  }

  meta.apparent_wind_clamps = diag.wind_clamp_events;
  meta.rls_resets = rls.resets();
  meta.mean_wind = wind.sample_mean();
  auto& g = result.gains;
  if (eor) {
    g.S = eor->exosystem().S;
    g.Pi = eor->regulator().Pi;
    g.Gamma = eor->regulator().Gamma;
    g.G = eor->regulator().G;
  }
  return result;
}

}  // namespace torsim
