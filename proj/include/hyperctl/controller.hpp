#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperctl/hyperspace.hpp"
#include "hyperctl/ridge.hpp"
#include "hyperctl/rng.hpp"

namespace hyperctl {

struct ControllerConfig {
  HyperSpace space;
  int window = 1;        // how many past rewards feed each prediction
  int grid_points = 10;  // discretization points per dimension
  double lambda = 1.0;   // ridge regularization weight
  std::uint64_t seed = 0;

  void validate() const {
    space.validate();
    if (window < 1) throw std::invalid_argument("controller window must be >= 1");
    if (grid_points < 2) throw std::invalid_argument("controller grid_points must be >= 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("controller lambda must be positive and finite");
    }
  }
};

/// Identifies one predictor: hyperparameter dimension, tuple of that
/// dimension's last `window` action indices (oldest first), candidate action.
struct ModelKey {
  int dim = 0;
  std::vector<int> context;
  int action = 0;

  auto operator<=>(const ModelKey&) const = default;
};

struct Suggestion {
  long iteration = 0;
  ConfigIndex index;           // chosen grid cell per dimension
  std::vector<double> values;  // concrete configuration, aligned with the space
  std::vector<bool> explored;  // true where the action came from warmup sampling
};

/// Online hyperparameter controller. Alternates strictly between suggest()
/// and observe(): suggest() picks one grid action per dimension (uniformly at
/// random during the first `window` iterations, greedily by predicted reward
/// afterwards), observe() feeds the scalar reward back into the per-context
/// ridge models.
///
/// Predictors are materialized lazily on first update; an absent model
/// predicts 0, exactly like a freshly initialized one, so behavior matches an
/// eagerly allocated table.
class Controller {
 public:
  enum class Phase { awaiting_suggest, awaiting_reward };

  explicit Controller(ControllerConfig config)
      : config_(validated(std::move(config))), grid_(build_grid(config_.space, config_.grid_points)) {
    window_ = RewardWindow(config_.window);
    history_.resize(config_.space.size());
    streams_.reserve(config_.space.size());
    for (int i = 0; i < config_.space.size(); ++i) {
      streams_.emplace_back(dimension_stream_seed(config_.seed, i));
    }
  }

  const ControllerConfig& config() const { return config_; }
  const Grid& grid() const { return grid_; }
  long iteration() const { return iteration_; }
  Phase phase() const { return phase_; }
  std::size_t model_count() const { return models_.size(); }

  bool warming_up() const { return iteration_ < config_.window; }

  Suggestion suggest() {
    require_phase(Phase::awaiting_suggest, "suggest");
    const int h = config_.space.size();
    const int d = config_.grid_points;

    Suggestion out;
    out.iteration = iteration_;
    out.index.resize(h);
    out.explored.resize(h);

    pending_contexts_.assign(h, {});
    if (warming_up()) {
      for (int i = 0; i < h; ++i) {
        out.index[i] = uniform_index(streams_[i], d);
        out.explored[i] = true;
      }
    } else {
      pending_xi_ = window_.as_vector();
      for (int i = 0; i < h; ++i) {
        pending_contexts_[i].assign(history_[i].begin(), history_[i].end());
        out.index[i] = select_greedy(i, pending_contexts_[i]);
        out.explored[i] = false;
      }
    }

    out.values = index_to_config(grid_, out.index);
    pending_actions_ = out.index;
    phase_ = Phase::awaiting_reward;
    return out;
  }

  void observe(double reward) {
    require_phase(Phase::awaiting_reward, "observe");
    if (!std::isfinite(reward)) throw std::invalid_argument("observe: reward must be finite");

    if (!warming_up()) {
      for (int i = 0; i < config_.space.size(); ++i) {
        model(i, pending_contexts_[i], pending_actions_[i]).update(pending_xi_, reward);
      }
    }
    window_.push(reward);
    for (int i = 0; i < config_.space.size(); ++i) {
      auto& hist = history_[i];
      hist.push_back(pending_actions_[i]);
      if (static_cast<int>(hist.size()) > config_.window) hist.pop_front();
    }
    ++iteration_;
    phase_ = Phase::awaiting_suggest;
    pending_actions_.clear();
    pending_contexts_.clear();
    pending_xi_.resize(0);
  }

  /// Predictor for (dimension, context, action), materialized on first
  /// access with the fresh-model initialization.
  RidgeModel& model(int dim, const std::vector<int>& context, int action) {
    auto [it, inserted] = models_.try_emplace(ModelKey{dim, context, action},
                                              config_.window, config_.lambda);
    return it->second;
  }

  const RidgeModel* find_model(int dim, const std::vector<int>& context, int action) const {
    auto it = models_.find(ModelKey{dim, context, action});
    return it == models_.end() ? nullptr : &it->second;
  }

  const std::map<ModelKey, RidgeModel>& models() const { return models_; }

  nlohmann::json snapshot() const;
  static Controller restore(const nlohmann::json& doc);

 private:
  static ControllerConfig validated(ControllerConfig config) {
    config.validate();
    return config;
  }

  void require_phase(Phase expected, const char* op) const {
    if (phase_ != expected) {
      throw std::logic_error(std::string(op) +
                             ": out of turn (suggest and observe must alternate strictly)");
    }
  }

  /// Greedy argmax of the predicted reward over the d candidate actions,
  /// ties broken uniformly with this dimension's stream.
  int select_greedy(int dim, const std::vector<int>& context) {
    const int d = config_.grid_points;
    std::vector<double> predicted(d, 0.0);
    for (int a = 0; a < d; ++a) {
      if (const RidgeModel* m = find_model(dim, context, a)) {
        predicted[a] = m->predict(pending_xi_);
      }
    }
    const double best = *std::max_element(predicted.begin(), predicted.end());
    std::vector<int> maximizers;
    for (int a = 0; a < d; ++a) {
      if (predicted[a] == best) maximizers.push_back(a);
    }
    if (maximizers.size() == 1) return maximizers.front();
    return maximizers[uniform_index(streams_[dim], static_cast<int>(maximizers.size()))];
  }

  ControllerConfig config_;
  Grid grid_;
  long iteration_ = 0;
  Phase phase_ = Phase::awaiting_suggest;
  RewardWindow window_{1};
  std::vector<std::deque<int>> history_;  // per dimension, last `window` chosen actions
  std::vector<std::mt19937_64> streams_;  // per dimension
  std::map<ModelKey, RidgeModel> models_;

  // set by suggest(), consumed by observe()
  std::vector<int> pending_actions_;
  std::vector<std::vector<int>> pending_contexts_;
  Eigen::VectorXd pending_xi_;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                                        Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw std::invalid_argument("snapshot: malformed matrix");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("snapshot: malformed matrix row");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw std::invalid_argument("snapshot: malformed vector");
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json Controller::snapshot() const {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["kind"] = "controller_snapshot";

  nlohmann::json space = nlohmann::json::array();
  for (const auto& dim : config_.space.dims) {
    space.push_back({{"name", dim.name}, {"lo", dim.lo}, {"hi", dim.hi},
                     {"scale", to_string(dim.scale)}});
  }
  doc["space"] = std::move(space);
  doc["window"] = config_.window;
  doc["grid_points"] = config_.grid_points;
  doc["lambda"] = config_.lambda;
  doc["seed"] = config_.seed;

  doc["iteration"] = iteration_;
  doc["phase"] = phase_ == Phase::awaiting_suggest ? "awaiting_suggest" : "awaiting_reward";
  doc["rewards"] = window_.rewards();

  nlohmann::json histories = nlohmann::json::array();
  for (const auto& hist : history_) histories.push_back(std::vector<int>(hist.begin(), hist.end()));
  doc["history"] = std::move(histories);

  nlohmann::json streams = nlohmann::json::array();
  for (const auto& gen : streams_) streams.push_back(rng_state_string(gen));
  doc["rng"] = std::move(streams);

  if (phase_ == Phase::awaiting_reward) {
    doc["pending"] = {{"actions", pending_actions_},
                      {"contexts", pending_contexts_},
                      {"xi", detail::vector_to_json(pending_xi_)}};
  } else {
    doc["pending"] = nullptr;
  }

  nlohmann::json models = nlohmann::json::array();
  for (const auto& [key, m] : models_) {
    models.push_back({{"dim", key.dim},
                      {"context", key.context},
                      {"action", key.action},
                      {"v", detail::matrix_to_json(m.gram())},
                      {"b", detail::vector_to_json(m.moment().transpose())},
                      {"g", detail::vector_to_json(m.coefficients())},
                      {"updates", m.updates()}});
  }
  doc["models"] = std::move(models);
  return doc;
}

inline Controller Controller::restore(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("kind", "") != std::string("controller_snapshot")) {
    throw std::invalid_argument("restore: not a controller snapshot document");
  }
  if (doc.value("version", -1) != 1) {
    throw std::invalid_argument("restore: unsupported snapshot version");
  }

  ControllerConfig config;
  for (const auto& j : doc.at("space")) {
    config.space.dims.push_back({j.at("name").get<std::string>(), j.at("lo").get<double>(),
                                 j.at("hi").get<double>(),
                                 scale_from_string(j.at("scale").get<std::string>())});
  }
  config.window = doc.at("window").get<int>();
  config.grid_points = doc.at("grid_points").get<int>();
  config.lambda = doc.at("lambda").get<double>();
  config.seed = doc.at("seed").get<std::uint64_t>();
  config.validate();

  Controller ctl(config);
  ctl.iteration_ = doc.at("iteration").get<long>();
  if (ctl.iteration_ < 0) throw std::invalid_argument("restore: negative iteration");

  const std::string phase = doc.at("phase").get<std::string>();
  if (phase == "awaiting_suggest") {
    ctl.phase_ = Phase::awaiting_suggest;
  } else if (phase == "awaiting_reward") {
    ctl.phase_ = Phase::awaiting_reward;
  } else {
    throw std::invalid_argument("restore: unknown phase '" + phase + "'");
  }

  const auto expected_window = std::min<long>(ctl.iteration_, config.window);
  const auto& rewards = doc.at("rewards");
  if (static_cast<long>(rewards.size()) != expected_window) {
    throw std::invalid_argument("restore: reward window inconsistent with iteration counter");
  }
  for (const auto& r : rewards) ctl.window_.push(r.get<double>());

  const auto& histories = doc.at("history");
  if (static_cast<int>(histories.size()) != config.space.size()) {
    throw std::invalid_argument("restore: history count does not match dimensions");
  }
  for (int i = 0; i < config.space.size(); ++i) {
    const auto& hist = histories.at(i);
    if (static_cast<long>(hist.size()) != expected_window) {
      throw std::invalid_argument("restore: action history inconsistent with iteration counter");
    }
    for (const auto& a : hist) {
      const int action = a.get<int>();
      if (action < 0 || action >= config.grid_points) {
        throw std::invalid_argument("restore: action history entry out of range");
      }
      ctl.history_[i].push_back(action);
    }
  }

  const auto& streams = doc.at("rng");
  if (static_cast<int>(streams.size()) != config.space.size()) {
    throw std::invalid_argument("restore: RNG stream count does not match dimensions");
  }
  for (int i = 0; i < config.space.size(); ++i) {
    ctl.streams_[i] = rng_from_state_string(streams.at(i).get<std::string>());
  }

  const auto& pending = doc.at("pending");
  if (ctl.phase_ == Phase::awaiting_reward) {
    if (pending.is_null()) throw std::invalid_argument("restore: missing pending suggestion");
    ctl.pending_actions_ = pending.at("actions").get<std::vector<int>>();
    ctl.pending_contexts_ = pending.at("contexts").get<std::vector<std::vector<int>>>();
    if (static_cast<int>(ctl.pending_actions_.size()) != config.space.size() ||
        static_cast<int>(ctl.pending_contexts_.size()) != config.space.size()) {
      throw std::invalid_argument("restore: pending suggestion inconsistent with dimensions");
    }
    for (int a : ctl.pending_actions_) {
      if (a < 0 || a >= config.grid_points) {
        throw std::invalid_argument("restore: pending action out of range");
      }
    }
    const bool warmup = ctl.iteration_ < config.window;
    for (const auto& context : ctl.pending_contexts_) {
      if (static_cast<int>(context.size()) != (warmup ? 0 : config.window)) {
        throw std::invalid_argument("restore: pending context has wrong length");
      }
    }
    const auto& xi = pending.at("xi");
    ctl.pending_xi_ = detail::vector_from_json(xi, warmup ? 0 : config.window);
  } else if (!pending.is_null()) {
    throw std::invalid_argument("restore: unexpected pending suggestion");
  }

  for (const auto& jm : doc.at("models")) {
    ModelKey key;
    key.dim = jm.at("dim").get<int>();
    key.context = jm.at("context").get<std::vector<int>>();
    key.action = jm.at("action").get<int>();
    if (key.dim < 0 || key.dim >= config.space.size() ||
        static_cast<int>(key.context.size()) != config.window || key.action < 0 ||
        key.action >= config.grid_points) {
      throw std::invalid_argument("restore: model key out of range");
    }
    for (int a : key.context) {
      if (a < 0 || a >= config.grid_points) {
        throw std::invalid_argument("restore: model context entry out of range");
      }
    }
    const int s = config.window;
    auto model = RidgeModel::from_state(
        detail::matrix_from_json(jm.at("v"), s, s),
        detail::vector_from_json(jm.at("b"), s).transpose(),
        detail::vector_from_json(jm.at("g"), s), jm.at("updates").get<long>());
    if (!ctl.models_.emplace(std::move(key), std::move(model)).second) {
      throw std::invalid_argument("restore: duplicate model key");
    }
  }
  return ctl;
}

}  // namespace hyperctl
