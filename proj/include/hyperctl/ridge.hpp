#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "hyperctl/linalg.hpp"

namespace hyperctl {

/// Recursive ridge-regression predictor of the next reward from the last s
/// rewards. Holds the regularized Gram matrix V, the reward-feature moment
/// row B and the coefficient vector G, with
///
///   V <- V + xi xi',  B <- B + reward xi',  G = (B V^{-1})'
///
/// so G always equals the closed-form regularized least-squares solution for
/// the data absorbed so far. A model with no updates predicts 0 everywhere.
class RidgeModel {
 public:
  RidgeModel() = default;

  RidgeModel(int size, double lambda)
      : gram_(lambda * Eigen::MatrixXd::Identity(size, size)),
        moment_(Eigen::RowVectorXd::Zero(size)),
        coeff_(Eigen::VectorXd::Zero(size)) {
    if (size < 1) throw std::invalid_argument("ridge model needs size >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("ridge lambda must be positive");
  }

  void update(const Eigen::VectorXd& xi, double reward) {
    if (xi.size() != gram_.rows()) throw std::invalid_argument("regressor has wrong length");
    if (!xi.allFinite() || !std::isfinite(reward)) {
      throw std::invalid_argument("ridge update requires finite inputs");
    }
    gram_.noalias() += xi * xi.transpose();
    moment_.noalias() += reward * xi.transpose();
    coeff_ = solve_spd(gram_, moment_.transpose());
    ++updates_;
  }

  double predict(const Eigen::VectorXd& xi) const {
    if (xi.size() != coeff_.size()) throw std::invalid_argument("regressor has wrong length");
    if (!xi.allFinite()) throw std::invalid_argument("prediction requires finite inputs");
    return coeff_.dot(xi);
  }

  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::RowVectorXd& moment() const { return moment_; }
  const Eigen::VectorXd& coefficients() const { return coeff_; }
  long updates() const { return updates_; }
  int size() const { return static_cast<int>(coeff_.size()); }

  /// Rebuilds a model from serialized state; restore-path only. Rejects
  /// documents whose gram matrix is not positive definite or whose stored
  /// coefficients disagree with the closed-form solution.
  static RidgeModel from_state(Eigen::MatrixXd gram, Eigen::RowVectorXd moment,
                               Eigen::VectorXd coeff, long updates) {
    if (gram.rows() != gram.cols() || gram.rows() != moment.cols() || gram.rows() != coeff.size()) {
      throw std::invalid_argument("inconsistent ridge model state");
    }
    if (updates < 0 || !gram.allFinite() || !moment.allFinite() || !coeff.allFinite()) {
      throw std::invalid_argument("invalid ridge model state");
    }
    const Eigen::VectorXd recomputed = solve_spd(gram, moment.transpose());
    const double scale = std::max(recomputed.norm(), 1.0);
    if ((recomputed - coeff).norm() > 1e-8 * scale) {
      throw std::invalid_argument("ridge coefficients do not match the stored data");
    }
    RidgeModel m;
    m.gram_ = std::move(gram);
    m.moment_ = std::move(moment);
    m.coeff_ = std::move(coeff);
    m.updates_ = updates;
    return m;
  }

 private:
  Eigen::MatrixXd gram_;       // V, s x s, symmetric positive definite
  Eigen::RowVectorXd moment_;  // B, 1 x s
  Eigen::VectorXd coeff_;      // G, s x 1
  long updates_ = 0;
};

/// Ring buffer of the last `capacity` observed rewards, oldest first.
class RewardWindow {
 public:
  RewardWindow() = default;
  explicit RewardWindow(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("reward window capacity must be >= 1");
  }

  void push(double reward) {
    if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
    rewards_.push_back(reward);
    if (static_cast<int>(rewards_.size()) > capacity_) rewards_.pop_front();
  }

  bool full() const { return static_cast<int>(rewards_.size()) == capacity_; }
  int size() const { return static_cast<int>(rewards_.size()); }
  int capacity() const { return capacity_; }
  const std::deque<double>& rewards() const { return rewards_; }

  /// Contents as the regressor vector (oldest reward first).
  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(rewards_.size());
    for (std::size_t i = 0; i < rewards_.size(); ++i) v[i] = rewards_[i];
    return v;
  }

 private:
  int capacity_ = 1;
  std::deque<double> rewards_;
};

}  // namespace hyperctl
