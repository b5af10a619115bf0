#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "torsim/errors.hpp"
#include "torsim/exosystem.hpp"
#include "torsim/linear_model.hpp"

namespace torsim {

struct RegulatorSolution {
  Eigen::MatrixXd Pi;     // n × q
  Eigen::MatrixXd Gamma;  // m × q
  Eigen::MatrixXd G;      // m × q, Γ − FΠ
  double residual_dyn = 0.0;
  double residual_out = 0.0;
  bool infeasible = false;  // output equation not met to 1e-6
};

/// Solves the regulator equations
///   Π S = A Π + B Γ + E_w,   0 = C_z Π + D_w
/// for a general plant (A, B, C_z) and exosystem S. The Kronecker system in
/// (vec Π, vec Γ) is column-equilibrated and solved in the least-squares sense.
inline RegulatorSolution solve_regulator(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& C_z, const Eigen::MatrixXd& S,
                                         const Eigen::MatrixXd& E_w, const Eigen::MatrixXd& D_w,
                                         const Eigen::MatrixXd& F) {
  const auto n = A.rows(), m = B.cols(), p = C_z.rows(), q = S.rows();
  if (E_w.rows() != n || E_w.cols() != q || D_w.rows() != p || D_w.cols() != q || F.rows() != m || F.cols() != n)
    throw DomainError("solve_regulator: inconsistent dimensions");

  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n), Iq = Eigen::MatrixXd::Identity(q, q);
  const auto unknowns = n * q + m * q, equations = n * q + p * q;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(equations, unknowns);
  Eigen::VectorXd rhs(equations);
  // vec(ΠS) = (Sᵀ ⊗ I) vec Π, vec(AΠ) = (I ⊗ A) vec Π, vec(BΓ) = (I ⊗ B) vec Γ.
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      K.block(i * n, j * n, n, n) = S(j, i) * In - (i == j ? A : Eigen::MatrixXd::Zero(n, n));
      if (i == j) {
        K.block(i * n, n * q + j * m, n, m) = -B;
        K.block(n * q + i * p, j * n, p, n) = C_z;
      }
    }
    rhs.segment(i * n, n) = E_w.col(i);
    rhs.segment(n * q + i * p, p) = -D_w.col(i);
  }

  Eigen::VectorXd scale(unknowns);
  for (Eigen::Index c = 0; c < unknowns; ++c) {
    const double nrm = K.col(c).norm();
    scale(c) = nrm > 0.0 ? 1.0 / nrm : 1.0;
  }
  const Eigen::MatrixXd Ks = K * scale.asDiagonal();
  const Eigen::VectorXd xs = Ks.completeOrthogonalDecomposition().solve(rhs);
  const Eigen::VectorXd x = scale.asDiagonal() * xs;
  if (!x.allFinite()) throw SynthesisError("solve_regulator: non-finite solution");

  RegulatorSolution sol;
  sol.Pi = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, q);
  sol.Gamma = Eigen::Map<const Eigen::MatrixXd>(x.data() + n * q, m, q);
  sol.G = sol.Gamma - F * sol.Pi;
  sol.residual_dyn = (sol.Pi * S - A * sol.Pi - B * sol.Gamma - E_w).norm();
  sol.residual_out = (C_z * sol.Pi + D_w).norm();
  sol.infeasible = sol.residual_out > 1e-6;
  return sol;
}

/// Regulator equations for a discrete design model and its exosystem, with
/// E_w = H L_d and D_w = −L_r.
inline RegulatorSolution solve_regulator(const LinearModel& model, const ExoModel& exo, const Eigen::MatrixXd& F) {
  if (model.form != ModelForm::Discrete) throw DomainError("solve_regulator: design model must be discrete");
  if (std::abs(model.Ts - exo.Ts) > 1e-12) throw DomainError("solve_regulator: model and exosystem sample times differ");
  return solve_regulator(model.A, model.B, model.C_z, exo.S, model.H * exo.L_d, -exo.L_r, F);
}

}  // namespace torsim
