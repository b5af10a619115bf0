#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>

#include "torsim/errors.hpp"
#include "torsim/plant.hpp"

namespace torsim {

enum class Region { Region2, Region3 };

inline const char* to_string(Region r) { return r == Region::Region2 ? "Region2" : "Region3"; }

/// Operating point of the physical plant for a given mean wind speed.
struct Equilibrium {
  Region region = Region::Region2;
  PlantState state;
  ControlInput input;
  double wind = 0.0;  // d* [m/s]
};

/// Pitch that holds rated torque at rated speed, M_a(Ω_rated, v, θ) = M_rated,
/// found by bisection on [0, π/2].
inline double rated_pitch(const PlantModel& plant, double wind) {
  const auto& p = plant.params();
  auto excess = [&](double theta) {
    return plant.aero().torque(p.rated_rotor_speed, wind, theta) - p.rated_gen_torque;
  };
  double lo = 0.0, hi = std::numbers::pi / 2;
  double f_lo = excess(lo);
  if (f_lo < 0.0 || excess(hi) > 0.0)
    throw EquilibriumError("rated-torque pitch not bracketed at v = " + std::to_string(wind) + " m/s");
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = excess(mid);
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline Equilibrium find_equilibrium(const PlantModel& plant, double v0) {
  const auto& p = plant.params();
  if (!(v0 >= p.cut_in && v0 <= p.cut_out))
    throw DomainError("find_equilibrium: mean wind outside [cut_in, cut_out]");
  Equilibrium eq;
  eq.wind = v0;
  auto& s = eq.state;
  if (v0 < p.rated_wind) {
    eq.region = Region::Region2;
    s.rotor_speed = p.lambda_star * v0 / p.rotor_radius;
    s.pitch = 0.0;
    eq.input.gen_torque = plant.aero().torque(s.rotor_speed, v0, 0.0);
  } else {
    eq.region = Region::Region3;
    s.rotor_speed = p.rated_rotor_speed;
    s.pitch = rated_pitch(plant, v0);
    eq.input.gen_torque = p.rated_gen_torque;
  }
  s.generator_speed = s.rotor_speed;
  s.torsion = eq.input.gen_torque / p.K_d;
  s.pitch_rate = 0.0;
  eq.input.pitch_command = s.pitch;
  s.tower_disp = p.x_T0 + plant.aero().thrust(s.rotor_speed, v0, s.pitch) / p.k_Te;
  s.tower_vel = 0.0;
  return eq;
}

/// Slope dθ*/dv of the rated-pitch locus by central difference.
inline double rated_pitch_slope(const PlantModel& plant, double v0, double step = 0.1) {
  return (rated_pitch(plant, v0 + step) - rated_pitch(plant, v0 - step)) / (2.0 * step);
}

enum class ModelForm { Continuous, Discrete };

/// LTI design model in coordinates homogenised to an equilibrium:
///   x̄' = A x̄ + B ū + H d̄,  ȳ = C_y x̄,  z̄ = C_z x̄.
/// Region 2: x = [Ω_r φ Ω_g], u = M_g. Region 3: x = [Ω_r φ Ω_g θ θ̇], u = θ_c.
struct LinearModel {
  using Index = Eigen::Index;

  Region region = Region::Region2;
  Eigen::MatrixXd A, B, H, C_y, C_z;
  Eigen::VectorXd x_star, u_star;
  double d_star = 0.0;
  ModelForm form = ModelForm::Continuous;
  double Ts = 0.0;  // sample time when discrete

  // Aerodynamic Jacobians at the operating point.
  double gamma = 0.0;  // ∂M_a/∂Ω_r
  double alpha = 0.0;  // ∂M_a/∂v
  double beta = 0.0;   // ∂M_a/∂θ

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
  Index outputs() const { return C_y.rows(); }
};

namespace detail {

inline double central_diff(const auto& f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); }

/// Central difference with relative step, Richardson-extrapolated once.
inline double richardson_diff(const auto& f, double x, double rel_step = 1e-6) {
  const double h = rel_step * std::max(std::abs(x), 1.0);
  const double d1 = central_diff(f, x, h);
  const double d2 = central_diff(f, x, 0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

inline Eigen::MatrixXcd::Index rank_of(const Eigen::MatrixXcd& m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace detail

/// PBH test: rank [λI − A, B] = n for every eigenvalue λ that is not strictly
/// stable (Re λ ≥ 0 in continuous time, |λ| ≥ 1 in discrete time).
inline bool is_stabilizable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, ModelForm form) {
  const auto n = A.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  // Scale-balance so the rank threshold is meaningful for mixed units.
  const double a_scale = std::max(1.0, A.norm());
  const double b_scale = B.norm() > 0.0 ? B.norm() : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    const bool unstable = form == ModelForm::Continuous ? lam.real() >= -1e-12 : std::abs(lam) >= 1.0 - 1e-12;
    if (!unstable) continue;
    Eigen::MatrixXcd pbh(n, n + B.cols());
    pbh.leftCols(n) = (lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>()) / a_scale;
    pbh.rightCols(B.cols()) = B.cast<std::complex<double>>() / b_scale;
    if (detail::rank_of(pbh) < n) return false;
  }
  return true;
}

inline bool is_detectable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C, ModelForm form) {
  return is_stabilizable(A.transpose(), C.transpose(), form);
}

inline LinearModel linearize(const PlantModel& plant, const Equilibrium& eq) {
  const auto& p = plant.params();
  const auto& aero = plant.aero();
  const double om = eq.state.rotor_speed, v = eq.wind, th = eq.state.pitch;

  LinearModel m;
  m.region = eq.region;
  m.d_star = v;
  m.gamma = detail::richardson_diff([&](double x) { return aero.torque(x, v, th); }, om);
  m.alpha = detail::richardson_diff([&](double x) { return aero.torque(om, x, th); }, v);
  m.beta = detail::richardson_diff([&](double x) { return aero.torque(om, v, x); }, th);

  const double jr = p.J_r, jg = p.J_g_eff, cd = p.C_d, kd = p.K_d, w = p.pitch_omega;
  if (eq.region == Region::Region2) {
    m.A.resize(3, 3);
    m.A << (m.gamma - cd) / jr, -kd / jr, cd / jr,
           1.0, 0.0, -1.0,
           cd / jg, kd / jg, -cd / jg;
    m.B = Eigen::MatrixXd::Zero(3, 1);
    m.B(2, 0) = -1.0 / jg;
    m.H = Eigen::MatrixXd::Zero(3, 1);
    m.H(0, 0) = m.alpha / jr;
    m.C_y = Eigen::MatrixXd::Zero(2, 3);
    m.C_y(0, 0) = 1.0;
    m.C_y(1, 2) = 1.0;
    m.C_z = Eigen::MatrixXd::Zero(1, 3);
    m.C_z(0, 0) = 1.0;
    m.x_star.resize(3);
    m.x_star << om, eq.state.torsion, eq.state.generator_speed;
    m.u_star.resize(1);
    m.u_star << eq.input.gen_torque;
  } else {
    m.A = Eigen::MatrixXd::Zero(5, 5);
    m.A.row(0) << (m.gamma - cd) / jr, -kd / jr, cd / jr, m.beta / jr, 0.0;
    m.A.row(1) << 1.0, 0.0, -1.0, 0.0, 0.0;
    m.A.row(2) << cd / jg, kd / jg, -cd / jg, 0.0, 0.0;
    m.A.row(3) << 0.0, 0.0, 0.0, 0.0, 1.0;
    m.A.row(4) << 0.0, 0.0, 0.0, -w * w, -2.0 * p.pitch_zeta * w;
    m.B = Eigen::MatrixXd::Zero(5, 1);
    m.B(4, 0) = w * w;
    m.H = Eigen::MatrixXd::Zero(5, 1);
    m.H(0, 0) = m.alpha / jr;
    m.C_y = Eigen::MatrixXd::Zero(3, 5);
    m.C_y(0, 0) = 1.0;
    m.C_y(1, 2) = 1.0;
    m.C_y(2, 3) = 1.0;
    m.C_z = Eigen::MatrixXd::Zero(1, 5);
    m.C_z(0, 3) = 1.0;
    m.x_star.resize(5);
    m.x_star << om, eq.state.torsion, eq.state.generator_speed, th, 0.0;
    m.u_star.resize(1);
    m.u_star << eq.input.pitch_command;
  }

  if (!is_stabilizable(m.A, m.B, ModelForm::Continuous))
    throw SynthesisError("linearize: (A, B) not stabilizable");
  if (!is_detectable(m.A, m.C_y, ModelForm::Continuous))
    throw SynthesisError("linearize: (C_y, A) not detectable");
  return m;
}

/// Exact zero-order-hold discretization via the exponential of the augmented
/// matrix [[A, B H], [0, 0]]·Ts.
inline LinearModel discretize(const LinearModel& m, double Ts) {
  if (m.form != ModelForm::Continuous) throw DomainError("discretize: model is already discrete");
  if (!(Ts > 0.0)) throw DomainError("discretize: sample time must be positive");
  const auto n = m.A.rows(), nu = m.B.cols(), nd = m.H.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + nu + nd, n + nu + nd);
  aug.topLeftCorner(n, n) = m.A * Ts;
  aug.block(0, n, n, nu) = m.B * Ts;
  aug.block(0, n + nu, n, nd) = m.H * Ts;
  const Eigen::MatrixXd e = aug.exp();
  if (!e.allFinite()) throw SynthesisError("discretize: matrix exponential overflow");
  LinearModel d = m;
  d.A = e.topLeftCorner(n, n);
  d.B = e.block(0, n, n, nu);
  d.H = e.block(0, n + nu, n, nd);
  d.form = ModelForm::Discrete;
  d.Ts = Ts;
  return d;
}

inline double spectral_radius(const Eigen::MatrixXd& M) {
  return M.size() == 0 ? 0.0 : Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace torsim
