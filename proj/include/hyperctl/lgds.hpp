#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "hyperctl/hyperspace.hpp"
#include "hyperctl/linalg.hpp"
#include "hyperctl/rng.hpp"

namespace hyperctl {

// Eigen decompositions at every state dimension we allow stay desk-scale.
inline constexpr int kMaxStateDim = 4096;

struct NoiseScales {
  double process = 1.0;      // scale of the process-noise covariance
  double measurement = 1.0;  // standard deviation of the measurement noise

  bool zero() const { return process == 0.0 && measurement == 0.0; }
};

/// Ground truth of the synthetic environment: a latent state of one component
/// per grid cell evolving as z' = state_matrix * z + process noise, observed
/// through the component selected by the chosen configuration plus
/// measurement noise.
class LgdsParams {
 public:
  LgdsParams() = default;

  LgdsParams(Eigen::MatrixXd state_matrix, Eigen::MatrixXd process_cov, double measurement_var,
             int grid_points, int dims, bool degenerate = false)
      : state_matrix_(std::move(state_matrix)),
        process_cov_(std::move(process_cov)),
        measurement_var_(measurement_var),
        grid_points_(grid_points),
        dims_(dims),
        degenerate_(degenerate) {
    validate();
    process_cov_sqrt_ = psd_sqrt(process_cov_);
  }

  const Eigen::MatrixXd& state_matrix() const { return state_matrix_; }
  const Eigen::MatrixXd& process_cov() const { return process_cov_; }
  const Eigen::MatrixXd& process_cov_sqrt() const { return process_cov_sqrt_; }
  double measurement_var() const { return measurement_var_; }
  int grid_points() const { return grid_points_; }
  int dims() const { return dims_; }
  bool degenerate() const { return degenerate_; }
  int state_dim() const { return static_cast<int>(state_matrix_.rows()); }

  /// Flat state component observed by a configuration index.
  int component(const ConfigIndex& a) const {
    if (static_cast<int>(a.size()) != dims_) {
      throw std::invalid_argument("configuration index has wrong number of dimensions");
    }
    for (int v : a) {
      if (v < 0 || v >= grid_points_) throw std::out_of_range("configuration index out of range");
    }
    return flat_index(a, grid_points_);
  }

  nlohmann::json to_json() const;
  static LgdsParams from_json(const nlohmann::json& doc);

 private:
  void validate() const {
    const auto m = state_matrix_.rows();
    if (m < 1 || state_matrix_.cols() != m) {
      throw std::invalid_argument("state matrix must be square and non-empty");
    }
    if (m > kMaxStateDim) throw std::invalid_argument("state dimension exceeds supported maximum");
    if (process_cov_.rows() != m || process_cov_.cols() != m) {
      throw std::invalid_argument("process covariance has wrong shape");
    }
    if (!state_matrix_.allFinite() || !process_cov_.allFinite()) {
      throw std::invalid_argument("system matrices must be finite");
    }
    if ((process_cov_ - process_cov_.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument("process covariance must be symmetric");
    }
    if (!(measurement_var_ >= 0.0) || !std::isfinite(measurement_var_)) {
      throw std::invalid_argument("measurement variance must be nonnegative and finite");
    }
    if (grid_points_ < 1 || dims_ < 1) {
      throw std::invalid_argument("grid shape must be at least 1x1");
    }
    long expected = 1;
    for (int i = 0; i < dims_; ++i) expected *= grid_points_;
    if (expected != m) {
      throw std::invalid_argument("state dimension must equal grid_points^dims");
    }
    if (spectral_radius(state_matrix_) >= 1.0) {
      throw std::invalid_argument("state matrix must be Schur (spectral radius < 1)");
    }
  }

  Eigen::MatrixXd state_matrix_;     // Gamma
  Eigen::MatrixXd process_cov_;      // Q
  Eigen::MatrixXd process_cov_sqrt_;
  double measurement_var_ = 0.0;     // sigma^2
  int grid_points_ = 1;              // d
  int dims_ = 1;                     // h
  bool degenerate_ = false;          // zero-noise test mode
};

/// Draws a random system with the requested spectral radius and an
/// almost-surely controllable process-noise covariance. With zero noise
/// scales the controllability requirement is waived and the returned params
/// are flagged degenerate.
inline LgdsParams generate_grid_system(int grid_points, int dims, double target_spectral_radius,
                                       NoiseScales scales, std::uint64_t seed) {
  if (!(target_spectral_radius > 0.0) || !(target_spectral_radius < 1.0)) {
    throw std::invalid_argument("target spectral radius must lie in (0, 1)");
  }
  if (grid_points < 1 || dims < 1) throw std::invalid_argument("grid shape must be at least 1x1");
  long m_long = 1;
  for (int i = 0; i < dims; ++i) {
    m_long *= grid_points;
    if (m_long > kMaxStateDim) throw std::invalid_argument("state dimension exceeds supported maximum");
  }
  const int m = static_cast<int>(m_long);
  if (!(scales.process >= 0.0) || !(scales.measurement >= 0.0)) {
    throw std::invalid_argument("noise scales must be nonnegative");
  }

  std::mt19937_64 gen(mix64(seed));
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::MatrixXd gamma(m, m);
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) gamma(r, c) = normal_sample(gen);
    }
    const double rho = spectral_radius(gamma);
    if (rho <= 0.0) continue;
    gamma *= target_spectral_radius / rho;

    Eigen::MatrixXd q;
    double sigma2;
    bool degenerate = scales.zero();
    if (degenerate) {
      q = Eigen::MatrixXd::Zero(m, m);
      sigma2 = 0.0;
    } else {
      Eigen::MatrixXd mix(m, m);
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) mix(r, c) = normal_sample(gen);
      }
      q = symmetrize(scales.process * scales.process / m * (mix * mix.transpose()));
      sigma2 = scales.measurement * scales.measurement;
      if (!is_controllable(gamma, psd_sqrt(q))) continue;
    }
    return LgdsParams(std::move(gamma), std::move(q), sigma2, grid_points, dims, degenerate);
  }
  throw std::runtime_error("generate_grid_system: could not draw an admissible system");
}

/// Flat variant: one hyperparameter dimension, state dimension = grid points.
inline LgdsParams generate_system(int state_dim, double target_spectral_radius, NoiseScales scales,
                                  std::uint64_t seed) {
  return generate_grid_system(state_dim, 1, target_spectral_radius, scales, seed);
}

/// One trajectory of the environment. Owns its latent state and RNG stream;
/// every step consumes the same number of draws regardless of the action, so
/// trajectories with equal seeds are identical across policies.
class LgdsEnv {
 public:
  struct StepResult {
    double reward = 0.0;         // observed component plus measurement noise
    Eigen::VectorXd state;       // noise-free latent state at this step (oracle side channel)
  };

  LgdsEnv(const LgdsParams& params, std::uint64_t seed, bool stationary_start = true)
      : params_(&params), gen_(mix64(seed)) {
    const int m = params.state_dim();
    if (stationary_start) {
      const Eigen::MatrixXd stationary_sqrt =
          psd_sqrt(solve_lyapunov(params.state_matrix(), params.process_cov()));
      state_ = stationary_sqrt * normal_vector(m);
    } else {
      state_ = Eigen::VectorXd::Zero(m);
    }
  }

  /// Trajectory started from a caller-chosen latent state.
  LgdsEnv(const LgdsParams& params, std::uint64_t seed, Eigen::VectorXd initial_state)
      : params_(&params), state_(std::move(initial_state)), gen_(mix64(seed)) {
    if (state_.size() != params.state_dim() || !state_.allFinite()) {
      throw std::invalid_argument("initial state has wrong shape or non-finite entries");
    }
  }

  const Eigen::VectorXd& state() const { return state_; }
  long step_count() const { return steps_; }

  StepResult step(const ConfigIndex& a) { return step_component(params_->component(a)); }

  StepResult step_component(int component) {
    if (component < 0 || component >= params_->state_dim()) {
      throw std::out_of_range("component out of range");
    }
    StepResult out;
    out.state = state_;
    const double noise_sd = std::sqrt(params_->measurement_var());
    out.reward = state_[component] + noise_sd * normal_sample(gen_);
    state_ = params_->state_matrix() * state_ +
             params_->process_cov_sqrt() * normal_vector(params_->state_dim());
    ++steps_;
    return out;
  }

 private:
  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal_sample(gen_);
    return v;
  }

  const LgdsParams* params_;
  Eigen::VectorXd state_;
  long steps_ = 0;
  std::mt19937_64 gen_;
};

inline nlohmann::json LgdsParams::to_json() const {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["kind"] = "lgds_system";
  nlohmann::json gamma = nlohmann::json::array();
  nlohmann::json q = nlohmann::json::array();
  for (int r = 0; r < state_dim(); ++r) {
    nlohmann::json gr = nlohmann::json::array();
    nlohmann::json qr = nlohmann::json::array();
    for (int c = 0; c < state_dim(); ++c) {
      gr.push_back(state_matrix_(r, c));
      qr.push_back(process_cov_(r, c));
    }
    gamma.push_back(std::move(gr));
    q.push_back(std::move(qr));
  }
  doc["state_matrix"] = std::move(gamma);
  doc["process_cov"] = std::move(q);
  doc["measurement_var"] = measurement_var_;
  doc["grid_points"] = grid_points_;
  doc["dims"] = dims_;
  doc["degenerate"] = degenerate_;
  return doc;
}

inline LgdsParams LgdsParams::from_json(const nlohmann::json& doc) {
  if (doc.value("kind", "") != std::string("lgds_system") || doc.value("version", -1) != 1) {
    throw std::invalid_argument("not a version-1 lgds_system document");
  }
  const auto& jg = doc.at("state_matrix");
  const int m = static_cast<int>(jg.size());
  Eigen::MatrixXd gamma(m, m), q(m, m);
  const auto& jq = doc.at("process_cov");
  if (static_cast<int>(jq.size()) != m) throw std::invalid_argument("process_cov shape mismatch");
  for (int r = 0; r < m; ++r) {
    const auto& gr = jg.at(r);
    const auto& qr = jq.at(r);
    if (static_cast<int>(gr.size()) != m || static_cast<int>(qr.size()) != m) {
      throw std::invalid_argument("system matrix row has wrong length");
    }
    for (int c = 0; c < m; ++c) {
      gamma(r, c) = gr.at(c).get<double>();
      q(r, c) = qr.at(c).get<double>();
    }
  }
  return LgdsParams(std::move(gamma), std::move(q), doc.at("measurement_var").get<double>(),
                    doc.at("grid_points").get<int>(), doc.at("dims").get<int>(),
                    doc.value("degenerate", false));
}

}  // namespace hyperctl
