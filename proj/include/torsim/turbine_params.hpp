#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "torsim/config.hpp"
#include "torsim/errors.hpp"

namespace torsim {

inline constexpr double kBetzLimit = 16.0 / 27.0;
inline constexpr double kRpmToRadPerSec = 2.0 * std::numbers::pi / 60.0;

/// Physical parameters of the turbine. Generator quantities are reflected to
/// the low-speed (rotor) side, so the drive-train equations live in a single
/// coordinate frame.
struct TurbineParams {
  double rated_power = 5.0e6;                              // W
  double rated_rotor_speed = 12.1 * kRpmToRadPerSec;       // rad/s
  double rated_wind = 11.4;                                // m/s
  double rated_gen_torque = 43.1e3 * 97.0;                 // N·m, rotor side
  double cut_in = 3.0;                                     // m/s
  double cut_out = 25.0;                                   // m/s
  double rotor_radius = 63.0;                              // m
  double hub_height = 90.0;                                // m
  double J_r = 1.18e7;                                     // kg·m²
  double J_g_eff = 534.0 * 97.0 * 97.0;                    // kg·m², rotor side
  double K_d = 867.0e6;                                    // N·m/rad
  double C_d = 6.2e6;                                      // N·m·s/rad
  double gearbox_ratio = 97.0;
  double m_Te = 4.36e3;                                    // kg
  double c_Te = 17782.0;                                   // N·s/m
  double k_Te = 1.81e6;                                    // N/m
  double x_T0 = -0.0140;                                   // m
  double pitch_omega = 2.0 * std::numbers::pi;             // rad/s
  double pitch_zeta = 0.70;
  double lambda_star = 7.55;
  double Cp_star = 0.482;
  double air_density = 1.225;                              // kg/m³

  /// Rated mechanical power M_rated·Ω_rated (differs from the electrical
  /// nameplate by the generator efficiency).
  double rated_mechanical_power() const { return rated_gen_torque * rated_rotor_speed; }

  double swept_area() const { return std::numbers::pi * rotor_radius * rotor_radius; }

  void validate() const {
    auto positive = [](const char* key, double v) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be strictly positive");
    };
    positive("rated_power", rated_power);
    positive("rated_rotor_speed", rated_rotor_speed);
    positive("rated_gen_torque", rated_gen_torque);
    positive("rotor_radius", rotor_radius);
    positive("hub_height", hub_height);
    positive("J_r", J_r);
    positive("J_g_eff", J_g_eff);
    positive("K_d", K_d);
    positive("C_d", C_d);
    positive("gearbox_ratio", gearbox_ratio);
    positive("m_Te", m_Te);
    positive("c_Te", c_Te);
    positive("k_Te", k_Te);
    positive("pitch_omega", pitch_omega);
    positive("pitch_zeta", pitch_zeta);
    positive("air_density", air_density);
    positive("lambda_star", lambda_star);
    if (!(rated_wind > 0.0 && rated_wind < cut_out)) throw ConfigError("rated_wind", "need 0 < rated_wind < cut_out");
    if (!(cut_in < rated_wind)) throw ConfigError("cut_in", "need cut_in < rated_wind");
    if (!(Cp_star > 0.0 && Cp_star < 0.593)) throw ConfigError("Cp_star", "need 0 < Cp_star < 0.593");
    if (!std::isfinite(x_T0)) throw ConfigError("x_T0", "must be finite");
  }

  /// Reads every field from flat keys named after the struct members. Missing
  /// keys keep their defaults.
  static TurbineParams from_config(const KeyValueConfig& cfg) {
    TurbineParams p;
    p.rated_power = cfg.get_double("rated_power", p.rated_power);
    p.rated_rotor_speed = cfg.get_double("rated_rotor_speed", p.rated_rotor_speed);
    p.rated_wind = cfg.get_double("rated_wind", p.rated_wind);
    p.rated_gen_torque = cfg.get_double("rated_gen_torque", p.rated_gen_torque);
    p.cut_in = cfg.get_double("cut_in", p.cut_in);
    p.cut_out = cfg.get_double("cut_out", p.cut_out);
    p.rotor_radius = cfg.get_double("rotor_radius", p.rotor_radius);
    p.hub_height = cfg.get_double("hub_height", p.hub_height);
    p.J_r = cfg.get_double("J_r", p.J_r);
    p.J_g_eff = cfg.get_double("J_g_eff", p.J_g_eff);
    p.K_d = cfg.get_double("K_d", p.K_d);
    p.C_d = cfg.get_double("C_d", p.C_d);
    p.gearbox_ratio = cfg.get_double("gearbox_ratio", p.gearbox_ratio);
    p.m_Te = cfg.get_double("m_Te", p.m_Te);
    p.c_Te = cfg.get_double("c_Te", p.c_Te);
    p.k_Te = cfg.get_double("k_Te", p.k_Te);
    p.x_T0 = cfg.get_double("x_T0", p.x_T0);
    p.pitch_omega = cfg.get_double("pitch_omega", p.pitch_omega);
    p.pitch_zeta = cfg.get_double("pitch_zeta", p.pitch_zeta);
    p.lambda_star = cfg.get_double("lambda_star", p.lambda_star);
    p.Cp_star = cfg.get_double("Cp_star", p.Cp_star);
    p.air_density = cfg.get_double("air_density", p.air_density);
    p.validate();
    return p;
  }
};

}  // namespace torsim
