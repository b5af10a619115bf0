#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "torsim/errors.hpp"
#include "torsim/exosystem.hpp"
#include "torsim/linear_model.hpp"
#include "torsim/plant.hpp"
#include "torsim/regulator.hpp"
#include "torsim/riccati.hpp"

namespace torsim {

enum class ControllerKind { EOR, DAC, Baseline };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::EOR: return "EOR";
    case ControllerKind::DAC: return "DAC";
    default: return "Baseline";
  }
}

inline ControllerKind parse_controller(const std::string& s) {
  if (s == "EOR" || s == "eor") return ControllerKind::EOR;
  if (s == "DAC" || s == "dac") return ControllerKind::DAC;
  if (s == "Baseline" || s == "baseline" || s == "BL") return ControllerKind::Baseline;
  throw ConfigError("controller", "unknown controller '" + s + "' (expected EOR, DAC or Baseline)");
}

// --- actuator limits --------------------------------------------------------

struct ActuatorLimits {
  double max_torque = 0.0;                                  // N·m
  double torque_rate = 1.5e7;                               // N·m/s
  double min_pitch = 0.0;                                   // rad
  double max_pitch = std::numbers::pi / 2;                  // rad
  double pitch_rate = 8.0 * std::numbers::pi / 180.0;       // rad/s

  static ActuatorLimits for_turbine(const TurbineParams& p) {
    ActuatorLimits l;
    l.max_torque = 1.1 * p.rated_gen_torque;
    return l;
  }
};

struct SaturationCounters {
  std::int64_t torque = 0;
  std::int64_t torque_rate = 0;
  std::int64_t pitch = 0;
  std::int64_t pitch_rate = 0;

  std::int64_t total() const { return torque + torque_rate + pitch + pitch_rate; }
};

/// Clamps magnitudes and rates of a command relative to the previously applied
/// one over the interval dt, counting every active limit.
inline ControlInput saturate(const ControlInput& u, const ControlInput& prev, double dt, const ActuatorLimits& lim,
                             SaturationCounters* count = nullptr) {
  auto clamp = [&](double v, double lo, double hi, std::int64_t* c) {
    if (v < lo || v > hi) {
      if (count) ++*c;
      return std::clamp(v, lo, hi);
    }
    return v;
  };
  SaturationCounters dummy;
  SaturationCounters* c = count ? count : &dummy;
  ControlInput out;
  out.gen_torque = clamp(u.gen_torque, 0.0, lim.max_torque, &c->torque);
  out.gen_torque = clamp(out.gen_torque, prev.gen_torque - lim.torque_rate * dt, prev.gen_torque + lim.torque_rate * dt,
                         &c->torque_rate);
  out.pitch_command = clamp(u.pitch_command, lim.min_pitch, lim.max_pitch, &c->pitch);
  out.pitch_command = clamp(out.pitch_command, prev.pitch_command - lim.pitch_rate * dt,
                            prev.pitch_command + lim.pitch_rate * dt, &c->pitch_rate);
  return out;
}

// --- Baseline ---------------------------------------------------------------

/// Optimal-mode gain k = ½ρπR⁵ Cp*/λ*³ of the law M_g = k Ω_r².
inline double optimal_mode_gain(const TurbineParams& p) {
  const double r = p.rotor_radius;
  return 0.5 * p.air_density * std::numbers::pi * std::pow(r, 5) * p.Cp_star / std::pow(p.lambda_star, 3);
}

/// Generator-torque ceiling above rated wind: rated torque down to 99 % of
/// rated speed, then a 10 %-slip line that meets the optimal-mode curve kΩ².
inline double torque_ceiling(const TurbineParams& p, double rotor_speed) {
  const double top = 0.99 * p.rated_rotor_speed;
  const double sync = top / 1.1;
  const double ramp = p.rated_gen_torque * (rotor_speed - sync) / (top - sync);
  const double k = optimal_mode_gain(p);
  return std::min(p.rated_gen_torque, std::max(k * rotor_speed * rotor_speed, ramp));
}

/// Quadratic torque law below rated, constant torque and PI pitch on the
/// rotor-speed error above rated.
class BaselineController {
 public:
  BaselineController(const TurbineParams& p, double kp, double ki)
      : p_(p), k_(optimal_mode_gain(p)), kp_(kp), ki_(ki), limits_(ActuatorLimits::for_turbine(p)) {}

  double torque_gain() const { return k_; }
  double kp() const { return kp_; }
  double ki() const { return ki_; }
  double integrator() const { return integrator_; }

  /// Presets the integrator so that zero speed error commands `pitch`.
  void set_trim(double pitch) { integrator_ = ki_ != 0.0 ? pitch / ki_ : 0.0; }
  void reset() { integrator_ = 0.0; }

  ControlInput step(double rotor_speed, Region region, double dt) {
    if (!(rotor_speed > 0.0)) throw DomainError("baseline_step: rotor speed must be positive");
    ControlInput u;
    if (region == Region::Region2) {
      u.gen_torque = k_ * rotor_speed * rotor_speed;
      u.pitch_command = 0.0;
      return u;
    }
    const double err = rotor_speed - p_.rated_rotor_speed;
    integrator_ += err * dt;
    double theta = kp_ * err + ki_ * integrator_;
    if (theta > limits_.max_pitch || theta < limits_.min_pitch) {
      theta = std::clamp(theta, limits_.min_pitch, limits_.max_pitch);
      if (ki_ != 0.0) integrator_ = (theta - kp_ * err) / ki_;
    }
    u.gen_torque = torque_ceiling(p_, rotor_speed);
    u.pitch_command = theta;
    return u;
  }

 private:
  TurbineParams p_;
  double k_;
  double kp_, ki_;
  ActuatorLimits limits_;
  double integrator_ = 0.0;
};

// --- synthesis helpers ------------------------------------------------------

struct SynthesisWeights {
  double r_region2 = 1e-12;
  double r_region3 = 10.0;
  double rotor_speed_weight_region3 = 200.0;  // extra Q entry on Ω_r above rated
  double process_noise = 1e-6;              // W = w·I
  double measurement_noise = 1e-4;          // V = v·I
};

inline Eigen::MatrixXd state_weight(const LinearModel& m, const SynthesisWeights& wts) {
  Eigen::MatrixXd Q = m.C_z.transpose() * m.C_z;
  if (m.region == Region::Region3) Q(0, 0) += wts.rotor_speed_weight_region3;
  return Q;
}

inline Eigen::MatrixXd input_weight(const LinearModel& m, const SynthesisWeights& wts) {
  return Eigen::MatrixXd::Constant(1, 1, m.region == Region::Region2 ? wts.r_region2 : wts.r_region3);
}

struct DacGain {
  Eigen::MatrixXd G_d;
  bool exact = false;
  double residual = 0.0;
};

/// Disturbance-cancelling gain: solves B G_d + H = 0 when H lies in the range
/// of B, otherwise returns the least-squares minimizer.
inline DacGain dac_gain(const Eigen::MatrixXd& B, const Eigen::MatrixXd& H) {
  if (B.rows() != H.rows()) throw DomainError("dac_gain: B and H row counts differ");
  DacGain g;
  g.G_d = -B.completeOrthogonalDecomposition().solve(H);
  g.residual = (B * g.G_d + H).norm();
  g.exact = g.residual <= 1e-10 * std::max(1.0, H.norm());
  return g;
}

/// Rigid-rotor reduction (J_r + J_g_eff) Ω̇ = γΩ + α v − M_g of a Region-2
/// model, returned as continuous (B, H) columns.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rigid_rotor_reduction(const LinearModel& m,
                                                                           const TurbineParams& p) {
  const double j = p.J_r + p.J_g_eff;
  return {Eigen::MatrixXd::Constant(1, 1, -1.0 / j), Eigen::MatrixXd::Constant(1, 1, m.alpha / j)};
}

// --- observer-based controllers --------------------------------------------

/// Common part of EOR and DAC: LQR state feedback plus a steady-state
/// predictor observer on the discrete design model.
class ObserverFeedback {
 public:
  ObserverFeedback() = default;
  ObserverFeedback(const LinearModel& discrete, const SynthesisWeights& wts) : model_(discrete) {
    if (discrete.form != ModelForm::Discrete) throw DomainError("controller synthesis needs a discrete model");
    F_ = lqr(model_.A, model_.B, state_weight(model_, wts), input_weight(model_, wts));
    const auto n = model_.states(), p = model_.outputs();
    K_A_ = kalman_gain(model_.A, model_.C_y, wts.process_noise * Eigen::MatrixXd::Identity(n, n),
                       wts.measurement_noise * Eigen::MatrixXd::Identity(p, p));
    x_hat_ = Eigen::VectorXd::Zero(n);
  }

  const LinearModel& model() const { return model_; }
  const Eigen::MatrixXd& F() const { return F_; }
  const Eigen::MatrixXd& K_A() const { return K_A_; }
  const Eigen::VectorXd& x_hat() const { return x_hat_; }
  void set_x_hat(const Eigen::VectorXd& x) { x_hat_ = x; }

  double feedback_radius() const { return spectral_radius(model_.A + model_.B * F_); }
  double observer_radius() const { return spectral_radius(model_.A + K_A_ * model_.C_y); }

 protected:
  /// x̂ ← A x̂ + B ū + E d + K_A (C_y x̂ − ȳ).
  void advance(const Eigen::VectorXd& u_bar, const Eigen::VectorXd& forcing, const Eigen::VectorXd& y_bar) {
    x_hat_ = model_.A * x_hat_ + model_.B * u_bar + forcing + K_A_ * (model_.C_y * x_hat_ - y_bar);
  }

  LinearModel model_;
  Eigen::MatrixXd F_, K_A_;
  Eigen::VectorXd x_hat_;
};

/// Exact output regulation: ū = F x̂ + G w with the observer driven by the
/// exosystem through E_w = H L_d.
class EorController : public ObserverFeedback {
 public:
  EorController() = default;
  EorController(const LinearModel& discrete, const ExoModel& exo, const SynthesisWeights& wts)
      : ObserverFeedback(discrete, wts) {
    refresh(exo);
  }

  /// Re-solves the regulator equations for a new exosystem.
  const RegulatorSolution& refresh(const ExoModel& exo) {
    exo_ = exo;
    E_w_ = model_.H * exo.L_d;
    regulator_ = solve_regulator(model_, exo, F_);
    return regulator_;
  }

  Eigen::VectorXd command(const Eigen::VectorXd& w) const { return F_ * x_hat_ + regulator_.G * w; }

  /// Observer update with the input actually applied over the step.
  void update(const Eigen::VectorXd& u_applied, const Eigen::VectorXd& y_bar, const Eigen::VectorXd& w) {
    advance(u_applied, E_w_ * w, y_bar);
  }

  /// Regulation error e = C_z x̄ + D_w w.
  double error(const Eigen::VectorXd& x_bar, const Eigen::VectorXd& w) const {
    return (model_.C_z * x_bar - exo_.L_r * w)(0);
  }

  const ExoModel& exosystem() const { return exo_; }
  const RegulatorSolution& regulator() const { return regulator_; }
  const Eigen::MatrixXd& G() const { return regulator_.G; }

 private:
  ExoModel exo_;
  Eigen::MatrixXd E_w_;
  RegulatorSolution regulator_;
};

/// Disturbance accommodation with LIDAR: ū = F x̂ + G_d z_d.
class DacController : public ObserverFeedback {
 public:
  DacController() = default;
  DacController(const LinearModel& discrete, const DacGain& gain, const SynthesisWeights& wts)
      : ObserverFeedback(discrete, wts), gain_(gain) {}

  Eigen::VectorXd command(double z_d) const { return F_ * x_hat_ + gain_.G_d * z_d; }

  void update(const Eigen::VectorXd& u_applied, const Eigen::VectorXd& y_bar, double z_d) {
    advance(u_applied, model_.H * z_d, y_bar);
  }

  const DacGain& gain() const { return gain_; }

 private:
  DacGain gain_;
};

}  // namespace torsim
