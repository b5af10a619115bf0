#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "torsim/errors.hpp"
#include "torsim/linear_model.hpp"

namespace torsim {

struct DareSolution {
  Eigen::MatrixXd P;
  int iterations = 0;
  double residual = 0.0;  // ‖AᵀPA − P − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q‖_F / max(1, ‖P‖_F)
};

inline double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                            const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  const Eigen::MatrixXd res =
      A.transpose() * P * A - P - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
  return res.norm() / std::max(1.0, P.norm());
}

/// Stabilizing solution of the discrete algebraic Riccati equation
///   P = AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q
/// by the structure-preserving doubling algorithm.
inline DareSolution dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                         const Eigen::MatrixXd& R, int max_iterations = 10000) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw DomainError("dare: inconsistent matrix dimensions");
  Eigen::LLT<Eigen::MatrixXd> R_llt(R);
  if (R_llt.info() != Eigen::Success) throw DomainError("dare: R must be positive definite");
  if (!is_stabilizable(A, B, ModelForm::Discrete)) throw SynthesisError("dare: (A, B) not stabilizable");

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd A_k = A;
  Eigen::MatrixXd G_k = B * R_llt.solve(B.transpose());
  Eigen::MatrixXd H_k = 0.5 * (Q + Q.transpose());

  DareSolution sol;
  for (int it = 1; it <= max_iterations; ++it) {
    const auto W = (I + G_k * H_k).partialPivLu();
    const Eigen::MatrixXd V1 = W.solve(A_k);
    const Eigen::MatrixXd V2 = W.solve(G_k.transpose()).transpose();
    G_k += A_k * V2 * A_k.transpose();
    Eigen::MatrixXd H_next = H_k + V1.transpose() * H_k * A_k;
    A_k = A_k * V1;
    if (!H_next.allFinite()) throw SynthesisError("dare: doubling iteration diverged");
    const double change = (H_next - H_k).norm();
    H_k = 0.5 * (H_next + H_next.transpose());
    if (change <= 1e-13 * std::max(H_k.norm(), 1e-300)) {
      sol.iterations = it;
      sol.P = H_k;
      sol.residual = dare_residual(A, B, Q, R, sol.P);
      return sol;
    }
  }
  throw SynthesisError("dare: no convergence within iteration limit");
}

/// Discrete LQR gain for u = F x: F = −(R + BᵀPB)⁻¹BᵀPA.
inline Eigen::MatrixXd lqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd P = dare(A, B, Q, R).P;
  return -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

/// Steady-state predictor gain for x̂⁺ = A x̂ + B u + K_A (C x̂ − y), from the
/// dual Riccati equation; A + K_A C is Schur stable.
inline Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C, const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& V) {
  if (!is_detectable(A, C, ModelForm::Discrete)) throw SynthesisError("kalman_gain: (C, A) not detectable");
  return lqr(A.transpose(), C.transpose(), W, V).transpose();
}

}  // namespace torsim
