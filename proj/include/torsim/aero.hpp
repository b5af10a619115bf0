#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "torsim/errors.hpp"
#include "torsim/turbine_params.hpp"

namespace torsim {

/// Analytic power-coefficient surface
///
///   Cp(λ, θ) = c1 (c2/λi − c3 θ − c4) exp(−c5/λi) + c6 λ,
///   1/λi     = 1/(λ + 0.08 θ) − 0.035/(1 + θ³),
///
/// with θ in degrees inside the formula and the result clipped at zero.
/// `calibrated()` adjusts (c2, c5) so that the θ = 0 curve peaks exactly at
/// (λ*, Cp*).
class CpSurface {
 public:
  using Coefficients = std::array<double, 6>;

  static constexpr Coefficients kHeierCoefficients{0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068};

  CpSurface() : CpSurface(kHeierCoefficients) {}
  explicit CpSurface(const Coefficients& c) : c_(c) {}

  static CpSurface calibrated(double lambda_star, double cp_star) {
    Coefficients c = kHeierCoefficients;
    auto residual = [&](double c2, double c5) {
      CpSurface s({c[0], c2, c[2], c[3], c5, c[5]});
      return std::array<double, 2>{s.raw_dlambda(lambda_star, 0.0), s.raw(lambda_star, 0.0) - cp_star};
    };
    double c2 = c[1], c5 = c[4];
    for (int it = 0; it < 100; ++it) {
      const auto r = residual(c2, c5);
      if (std::abs(r[0]) < 1e-15 && std::abs(r[1]) < 1e-15) break;
      const double h2 = 1e-6 * c2, h5 = 1e-6 * c5;
      const auto r2p = residual(c2 + h2, c5), r2m = residual(c2 - h2, c5);
      const auto r5p = residual(c2, c5 + h5), r5m = residual(c2, c5 - h5);
      const double j00 = (r2p[0] - r2m[0]) / (2 * h2), j01 = (r5p[0] - r5m[0]) / (2 * h5);
      const double j10 = (r2p[1] - r2m[1]) / (2 * h2), j11 = (r5p[1] - r5m[1]) / (2 * h5);
      const double det = j00 * j11 - j01 * j10;
      if (det == 0.0) throw EquilibriumError("Cp calibration: singular Jacobian");
      c2 -= (j11 * r[0] - j01 * r[1]) / det;
      c5 -= (-j10 * r[0] + j00 * r[1]) / det;
    }
    c[1] = c2;
    c[4] = c5;
    CpSurface s(c);
    if (std::abs(s.raw(lambda_star, 0.0) - cp_star) > 1e-9 || std::abs(s.raw_dlambda(lambda_star, 0.0)) > 1e-9)
      throw EquilibriumError("Cp calibration did not converge");
    return s;
  }

  /// Power coefficient at tip-speed ratio `lambda` and pitch `theta` [rad].
  double operator()(double lambda, double theta) const {
    if (!(lambda > 0.0)) throw DomainError("cp_surface: tip-speed ratio must be positive");
    return std::max(0.0, raw(lambda, theta));
  }

  const Coefficients& coefficients() const { return c_; }

 private:
  double inv_lambda_i(double lambda, double theta_deg) const {
    return 1.0 / (lambda + 0.08 * theta_deg) - 0.035 / (1.0 + theta_deg * theta_deg * theta_deg);
  }

  double raw(double lambda, double theta) const {
    const double th = theta * 180.0 / std::numbers::pi;
    const double u = inv_lambda_i(lambda, th);
    return c_[0] * (c_[1] * u - c_[2] * th - c_[3]) * std::exp(-c_[4] * u) + c_[5] * lambda;
  }

  double raw_dlambda(double lambda, double theta) const {
    const double th = theta * 180.0 / std::numbers::pi;
    const double u = inv_lambda_i(lambda, th);
    const double du = -1.0 / ((lambda + 0.08 * th) * (lambda + 0.08 * th));
    const double dcp_du = c_[0] * std::exp(-c_[4] * u) * (c_[1] - c_[4] * (c_[1] * u - c_[2] * th - c_[3]));
    return dcp_du * du + c_[5];
  }

  Coefficients c_;
};

/// Thrust-coefficient surrogate Ct = Ct0 (λ/λ*) exp(−kθ θ), capped at 1.2.
struct CtSurface {
  double ct0 = 0.75;
  double k_theta = 6.0;  // 1/rad
  double lambda_star = 7.55;

  double operator()(double lambda, double theta) const {
    if (!(lambda > 0.0)) throw DomainError("ct_surface: tip-speed ratio must be positive");
    return std::min(1.2, ct0 * (lambda / lambda_star) * std::exp(-k_theta * theta));
  }
};

/// Rotor aerodynamics: torque and thrust from the coefficient surfaces.
class Aerodynamics {
 public:
  explicit Aerodynamics(const TurbineParams& p)
      : cp_(CpSurface::calibrated(p.lambda_star, p.Cp_star)),
        ct_{0.75, 6.0, p.lambda_star},
        radius_(p.rotor_radius),
        rho_(p.air_density) {}

  double tip_speed_ratio(double rotor_speed, double wind) const {
    if (!(wind > 0.0)) throw DomainError("tip_speed_ratio: wind speed must be positive");
    if (!(rotor_speed > 0.0)) throw DomainError("tip_speed_ratio: rotor speed must be positive");
    return rotor_speed * radius_ / wind;
  }

  double cp(double lambda, double theta) const { return cp_(lambda, theta); }
  double ct(double lambda, double theta) const { return ct_(lambda, theta); }

  /// M_a = ½ρπR³ Cp(λ,θ)/λ · v².
  double torque(double rotor_speed, double wind, double theta) const {
    const double lambda = tip_speed_ratio(rotor_speed, wind);
    return 0.5 * rho_ * std::numbers::pi * radius_ * radius_ * radius_ * cp_(lambda, theta) / lambda * wind * wind;
  }

  /// F_a = ½ρπR² Ct(λ,θ) · v².
  double thrust(double rotor_speed, double wind, double theta) const {
    const double lambda = tip_speed_ratio(rotor_speed, wind);
    return 0.5 * rho_ * std::numbers::pi * radius_ * radius_ * ct_(lambda, theta) * wind * wind;
  }

  /// Power carried by the wind through the rotor disc, ½ρπR²v³.
  double wind_power(double wind) const {
    return 0.5 * rho_ * std::numbers::pi * radius_ * radius_ * wind * wind * wind;
  }

  const CpSurface& cp_surface() const { return cp_; }
  const CtSurface& ct_surface() const { return ct_; }

 private:
  CpSurface cp_;
  CtSurface ct_;
  double radius_;
  double rho_;
};

}  // namespace torsim
