#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>

#include "torsim/errors.hpp"
#include "torsim/linear_model.hpp"

namespace torsim {

/// Exponentially weighted recursive least squares fit of the AR model
///   w[n] = a₁ w[n−1] + … + a_N w[n−N].
class RlsEstimator {
 public:
  explicit RlsEstimator(int order = 2, double forgetting = 0.9, double p0 = 1e3)
      : order_(order), mu_(forgetting), p0_(p0) {
    if (order < 1) throw DomainError("RlsEstimator: order must be at least 1");
    if (!(forgetting > 0.0 && forgetting <= 1.0)) throw DomainError("RlsEstimator: forgetting factor must be in (0, 1]");
    if (!(p0 > 0.0)) throw DomainError("RlsEstimator: initial covariance must be positive");
    a_ = Eigen::VectorXd::Zero(order);
    P_ = p0 * Eigen::MatrixXd::Identity(order, order);
  }

  /// Feeds one sample. Returns true when a coefficient update took place
  /// (i.e. once N past samples are buffered).
  bool update(double sample) {
    bool updated = false;
    if (static_cast<int>(history_.size()) == order_) {
      const Eigen::VectorXd phi = regressor();
      const Eigen::VectorXd Pphi = P_ * phi;
      const double denom = mu_ + phi.dot(Pphi);
      const Eigen::VectorXd k = Pphi / denom;
      const Eigen::VectorXd a_new = a_ + k * (sample - phi.dot(a_));
      Eigen::MatrixXd P_new = (P_ - k * Pphi.transpose()) / mu_;
      P_new = 0.5 * (P_new + P_new.transpose()).eval();
      if (a_new.allFinite()) a_ = a_new;
      if (!P_new.allFinite() || Eigen::LLT<Eigen::MatrixXd>(P_new).info() != Eigen::Success) {
        P_ = p0_ * Eigen::MatrixXd::Identity(order_, order_);
        ++resets_;
      } else {
        P_ = P_new;
      }
      ++updates_;
      updated = true;
    }
    history_.push_front(sample);
    if (static_cast<int>(history_.size()) > order_) history_.pop_back();
    return updated;
  }

  /// (w[n−1], …, w[n−N]) for the next sample.
  Eigen::VectorXd regressor() const {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(order_);
    for (int i = 0; i < static_cast<int>(history_.size()); ++i) phi(i) = history_[i];
    return phi;
  }

  const Eigen::VectorXd& coefficients() const { return a_; }
  const Eigen::MatrixXd& covariance() const { return P_; }
  double forgetting() const { return mu_; }
  int order() const { return order_; }
  long updates() const { return updates_; }
  long resets() const { return resets_; }

 private:
  int order_;
  double mu_;
  double p0_;
  Eigen::VectorXd a_;
  Eigen::MatrixXd P_;
  std::deque<double> history_;
  long updates_ = 0;
  long resets_ = 0;
};

/// Autonomous exosystem w[n+1] = S w[n] with disturbance output d̄ = L_d w and
/// reference output r = L_r w.
struct ExoModel {
  Eigen::MatrixXd S;
  Eigen::MatrixXd L_d;
  Eigen::MatrixXd L_r;
  double Ts = 0.1;
  Region region = Region::Region2;

  Eigen::Index states() const { return S.rows(); }
};

/// Companion matrix of z^{n} − c₁z^{n−1} − … − c_n: first row c, ones on the
/// subdiagonal.
inline Eigen::MatrixXd companion_matrix(const Eigen::VectorXd& c) {
  const auto n = c.size();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  S.row(0) = c.transpose();
  for (Eigen::Index i = 1; i < n; ++i) S(i, i - 1) = 1.0;
  return S;
}

/// Reference gain on the wind deviation: λ*/R in Region 2, dθ*/dv at the
/// anchor wind in Region 3.
inline double reference_slope(const PlantModel& plant, Region region, double v_anchor) {
  const auto& p = plant.params();
  if (region == Region::Region2) return p.lambda_star / p.rotor_radius;
  return rated_pitch_slope(plant, v_anchor, 0.1);
}

/// Exosystem for fitted AR coefficients a (length N). The state has N + 1
/// components, the last coefficient of the companion row is zero.
inline ExoModel build_exosystem(const Eigen::VectorXd& a, Region region, const PlantModel& plant, double v_anchor,
                                double Ts) {
  const auto n = a.size() + 1;
  Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
  row.head(a.size()) = a;
  ExoModel exo;
  exo.S = companion_matrix(row);
  exo.L_d = Eigen::MatrixXd::Zero(1, n);
  exo.L_d(0, 0) = 1.0;
  exo.L_r = Eigen::MatrixXd::Zero(1, n);
  exo.L_r(0, 0) = reference_slope(plant, region, v_anchor);
  exo.Ts = Ts;
  exo.region = region;
  return exo;
}

}  // namespace torsim
