#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hyperctl/lgds.hpp"
#include "hyperctl/linalg.hpp"

namespace hyperctl {

/// One step of the prediction-error covariance recursion when `component` is
/// observed:
///
///   g(P, e) = A P A' + Q - A P e (e' P e + sigma^2)^{-1} e' P A'
///
/// The result is symmetrized against roundoff. A vanishing denominator is
/// only legal when P e = 0 as well (then the correction term is zero); that
/// situation can only arise in the degenerate zero-noise mode.
inline Eigen::MatrixXd dare_iterate(const Eigen::MatrixXd& p, const LgdsParams& params,
                                    int component) {
  const int m = params.state_dim();
  if (p.rows() != m || p.cols() != m) throw std::invalid_argument("covariance has wrong shape");
  if (component < 0 || component >= m) throw std::out_of_range("component out of range");

  const Eigen::MatrixXd& a = params.state_matrix();
  Eigen::MatrixXd next = a * p * a.transpose() + params.process_cov();
  const double denom = p(component, component) + params.measurement_var();
  const Eigen::VectorXd p_col = p.col(component);
  if (denom <= 0.0) {
    if (p_col.cwiseAbs().maxCoeff() > 0.0) {
      throw std::invalid_argument("degenerate innovation variance with nonzero covariance column");
    }
    return symmetrize(next);
  }
  const Eigen::VectorXd gain_dir = a * p_col;
  next.noalias() -= gain_dir * gain_dir.transpose() / denom;
  return symmetrize(next);
}

struct RiccatiOptions {
  double tolerance = 1e-10;  // max-norm change between iterates
  long max_iterations = 100000;
};

/// Stationary prediction-error covariance for a constant observed component,
/// found by iterating the covariance recursion to its fixed point.
inline Eigen::MatrixXd solve_per_action_riccati(const LgdsParams& params, int component,
                                                const RiccatiOptions& opts = {},
                                                const Eigen::MatrixXd* initial = nullptr) {
  Eigen::MatrixXd p = initial ? *initial : params.process_cov();
  for (long k = 0; k < opts.max_iterations; ++k) {
    Eigen::MatrixXd next = dare_iterate(p, params, component);
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change < opts.tolerance) return p;
  }
  throw std::runtime_error("solve_per_action_riccati: no convergence");
}

/// Constant filter gains built from one covariance bound P for all
/// components. P is the no-information Lyapunov solution P = A P A' + Q: it
/// dominates every per-component Riccati fixed point (each recursion only
/// subtracts PSD corrections from the Lyapunov map), and because A P A' + Q
/// equals P exactly, the optimal-gain identity
///
///   g(P, e) = (A - A L e') P (A - A L e')' + Q + sigma^2 A L L' A'  <=  P
///
/// yields a strict Lyapunov certificate for every closed loop whenever Q is
/// positive definite. A bound assembled by summing the per-component fixed
/// points satisfies the domination property too, but not the certificate,
/// and does produce unstable closed loops on some systems.
struct ModifiedKalmanGains {
  Eigen::MatrixXd covariance_bound;         // the dominating covariance
  std::vector<Eigen::VectorXd> gains;       // one gain column per component
  std::vector<double> closed_loop_radii;    // spectral radius of A - A L e' per component
};

inline ModifiedKalmanGains modified_kalman_gains(const LgdsParams& params) {
  const int m = params.state_dim();
  ModifiedKalmanGains out;
  out.covariance_bound = solve_lyapunov(params.state_matrix(), params.process_cov());

  const Eigen::MatrixXd& a = params.state_matrix();
  out.gains.reserve(m);
  out.closed_loop_radii.reserve(m);
  for (int c = 0; c < m; ++c) {
    const double denom = out.covariance_bound(c, c) + params.measurement_var();
    if (denom <= 0.0) {
      if (out.covariance_bound.col(c).cwiseAbs().maxCoeff() > 0.0) {
        throw std::invalid_argument("degenerate innovation variance in gain computation");
      }
      out.gains.push_back(Eigen::VectorXd::Zero(m));
    } else {
      out.gains.push_back(out.covariance_bound.col(c) / denom);
    }
    Eigen::MatrixXd closed_loop = a - (a * out.gains.back()) * Eigen::RowVectorXd::Unit(m, c);
    out.closed_loop_radii.push_back(spectral_radius(closed_loop));
  }
  return out;
}

/// Full-information time-varying Kalman filter run over a fixed
/// action/reward record, started from a zero state estimate and covariance Q.
struct KalmanRun {
  std::vector<double> predictions;         // one-step output predictions
  std::vector<double> predicted_variance;  // innovation variance per step
  Eigen::MatrixXd final_covariance;        // covariance after the last step
};

inline KalmanRun kalman_predict_sequence(const LgdsParams& params,
                                         const std::vector<int>& components,
                                         const std::vector<double>& rewards) {
  if (components.size() != rewards.size()) {
    throw std::invalid_argument("component and reward lists must have equal length");
  }
  const int m = params.state_dim();
  const Eigen::MatrixXd& a = params.state_matrix();

  Eigen::VectorXd estimate = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd cov = params.process_cov();
  KalmanRun run;
  run.predictions.reserve(components.size());
  run.predicted_variance.reserve(components.size());

  for (std::size_t t = 0; t < components.size(); ++t) {
    const int c = components[t];
    if (c < 0 || c >= m) throw std::out_of_range("component out of range");
    const double predicted = estimate[c];
    const double innovation_var = cov(c, c) + params.measurement_var();
    run.predictions.push_back(predicted);
    run.predicted_variance.push_back(innovation_var);

    if (innovation_var > 0.0) {
      const Eigen::VectorXd gain = cov.col(c) / innovation_var;
      estimate = a * estimate + (a * gain) * (rewards[t] - predicted);
      Eigen::MatrixXd cov_gain = a * cov.col(c);
      cov = symmetrize(a * cov * a.transpose() + params.process_cov() -
                       cov_gain * cov_gain.transpose() / innovation_var);
    } else {
      estimate = a * estimate;
      cov = symmetrize(a * cov * a.transpose() + params.process_cov());
    }
  }
  run.final_covariance = cov;
  return run;
}

inline KalmanRun kalman_predict_sequence(const LgdsParams& params,
                                         const std::vector<ConfigIndex>& actions,
                                         const std::vector<double>& rewards) {
  std::vector<int> components;
  components.reserve(actions.size());
  for (const auto& a : actions) components.push_back(params.component(a));
  return kalman_predict_sequence(params, components, rewards);
}

/// Coefficients of the constant-gain filter's output prediction as a linear
/// function of the last s observed rewards, ordered oldest reward first to
/// line up with the controller's regressor. history_components holds the s
/// previously observed components, oldest first; the closed-loop factors are
/// applied most-recent lag first.
inline Eigen::VectorXd true_coefficients(const LgdsParams& params,
                                         const ModifiedKalmanGains& gains,
                                         const std::vector<int>& history_components,
                                         int target_component) {
  const int m = params.state_dim();
  const int s = static_cast<int>(history_components.size());
  if (s < 1) throw std::invalid_argument("history must contain at least one component");
  if (target_component < 0 || target_component >= m) {
    throw std::out_of_range("component out of range");
  }
  const Eigen::MatrixXd& a = params.state_matrix();

  Eigen::VectorXd coeff(s);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Unit(m, target_component);
  for (int lag = 1; lag <= s; ++lag) {
    const int c = history_components[s - lag];
    if (c < 0 || c >= m) throw std::out_of_range("component out of range");
    coeff[s - lag] = row * (a * gains.gains[c]);
    row = row * (a - (a * gains.gains[c]) * Eigen::RowVectorXd::Unit(m, c));
  }
  return coeff;
}

}  // namespace hyperctl
