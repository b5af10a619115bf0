#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "torsim/aero.hpp"
#include "torsim/turbine_params.hpp"

namespace torsim {

using PlantVector = Eigen::Matrix<double, 7, 1>;

/// Physical state of the simulated turbine: two-mass drive train (generator
/// speed normalized to the rotor side), second-order pitch servo and the first
/// tower fore-aft mode.
struct PlantState {
  double rotor_speed = 0.0;      // Ω_r  [rad/s]
  double torsion = 0.0;          // φ    [rad]
  double generator_speed = 0.0;  // Ω_g  [rad/s]
  double pitch = 0.0;            // θ    [rad]
  double pitch_rate = 0.0;       // θ̇    [rad/s]
  double tower_disp = 0.0;       // x_T  [m]
  double tower_vel = 0.0;        // ẋ_T  [m/s]

  PlantVector vector() const {
    PlantVector v;
    v << rotor_speed, torsion, generator_speed, pitch, pitch_rate, tower_disp, tower_vel;
    return v;
  }

  static PlantState from_vector(const PlantVector& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5), v(6)};
  }

  bool finite() const { return vector().allFinite(); }
};

/// Rotor-side generator torque and pitch command.
struct ControlInput {
  double gen_torque = 0.0;    // M_g  [N·m]
  double pitch_command = 0.0; // θ_c  [rad]
};

struct PlantDiagnostics {
  std::int64_t wind_clamp_events = 0;  // apparent wind clamped to keep λ finite
};

class PlantModel {
 public:
  static constexpr double kMinApparentWind = 0.5;  // m/s

  explicit PlantModel(const TurbineParams& p) : p_(p), aero_(p) {}

  const TurbineParams& params() const { return p_; }
  const Aerodynamics& aero() const { return aero_; }

  /// Rotor-apparent wind v_x − ẋ_T, clamped away from zero.
  double apparent_wind(const PlantState& s, double wind, PlantDiagnostics* diag = nullptr) const {
    double v_rel = wind - s.tower_vel;
    if (v_rel <= 0.0) {
      if (diag) ++diag->wind_clamp_events;
      v_rel = kMinApparentWind;
    }
    return v_rel;
  }

  PlantVector derivative(const PlantState& s, const ControlInput& u, double wind,
                         PlantDiagnostics* diag = nullptr) const {
    const double v_rel = apparent_wind(s, wind, diag);
    const double m_a = aero_.torque(s.rotor_speed, v_rel, s.pitch);
    const double f_a = aero_.thrust(s.rotor_speed, v_rel, s.pitch);
    return derivative_with_loads(s, u, m_a, f_a);
  }

  /// Right-hand side with the aerodynamic torque and thrust supplied by the
  /// caller (used to isolate the structural terms).
  PlantVector derivative_with_loads(const PlantState& s, const ControlInput& u, double m_a, double f_a) const {
    const double slip = s.rotor_speed - s.generator_speed;
    const double shaft = p_.C_d * slip + p_.K_d * s.torsion;
    const double w = p_.pitch_omega;
    PlantVector d;
    d(0) = (m_a - shaft) / p_.J_r;
    d(1) = slip;
    d(2) = (shaft - u.gen_torque) / p_.J_g_eff;
    d(3) = s.pitch_rate;
    d(4) = -2.0 * p_.pitch_zeta * w * s.pitch_rate + w * w * (u.pitch_command - s.pitch);
    d(5) = s.tower_vel;
    d(6) = (f_a - p_.c_Te * s.tower_vel - p_.k_Te * (s.tower_disp - p_.x_T0)) / p_.m_Te;
    return d;
  }

  /// One classical RK4 step with the input and wind held over the step. The
  /// pitch angle is kept inside its mechanical stops [0, π/2].
  PlantState rk4_step(const PlantState& s, const ControlInput& u, double wind, double dt,
                      PlantDiagnostics* diag = nullptr) const {
    return rk4_step(s, u, wind, wind, wind, dt, diag);
  }

  /// RK4 step with the wind sampled at the start, midpoint and end of the step.
  PlantState rk4_step(const PlantState& s, const ControlInput& u, double wind0, double wind_mid, double wind1,
                      double dt, PlantDiagnostics* diag = nullptr) const {
    const PlantVector x = s.vector();
    const PlantVector k1 = derivative(s, u, wind0, diag);
    const PlantVector k2 = derivative(PlantState::from_vector(x + 0.5 * dt * k1), u, wind_mid, diag);
    const PlantVector k3 = derivative(PlantState::from_vector(x + 0.5 * dt * k2), u, wind_mid, diag);
    const PlantVector k4 = derivative(PlantState::from_vector(x + dt * k3), u, wind1, diag);
    PlantState next = PlantState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (next.pitch < 0.0) {
      next.pitch = 0.0;
      next.pitch_rate = std::max(0.0, next.pitch_rate);
    } else if (next.pitch > std::numbers::pi / 2) {
      next.pitch = std::numbers::pi / 2;
      next.pitch_rate = std::min(0.0, next.pitch_rate);
    }
    return next;
  }

  /// Shaft torque K_d φ + C_d (Ω_r − Ω_g).
  double shaft_torque(const PlantState& s) const {
    return p_.K_d * s.torsion + p_.C_d * (s.rotor_speed - s.generator_speed);
  }

 private:
  TurbineParams p_;
  Aerodynamics aero_;
};

}  // namespace torsim
