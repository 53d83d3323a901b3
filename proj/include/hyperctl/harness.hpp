#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperctl/controller.hpp"
#include "hyperctl/csv.hpp"
#include "hyperctl/lgds.hpp"
#include "hyperctl/rng.hpp"

namespace hyperctl {

/// One step of the regret ledger. Values are noise free: the gap is measured
/// on the latent state itself, never on the noisy observation.
struct RegretRecord {
  long t = 0;
  ConfigIndex action;
  double best_value = 0.0;    // max over all state components
  double chosen_value = 0.0;  // component picked by the policy
  double instantaneous = 0.0;
  double cumulative = 0.0;
};

/// Minimal decision-maker surface the harness drives. Implementations see
/// only their own suggestions and the noisy scalar rewards.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ConfigIndex suggest() = 0;
  virtual void observe(double reward) = 0;
};

class HyperControllerPolicy : public Policy {
 public:
  explicit HyperControllerPolicy(ControllerConfig config) : controller_(std::move(config)) {}

  ConfigIndex suggest() override { return controller_.suggest().index; }
  void observe(double reward) override { controller_.observe(reward); }

  const Controller& controller() const { return controller_; }

 private:
  Controller controller_;
};

/// Fresh uniform configuration every step.
class UniformRandomPolicy : public Policy {
 public:
  UniformRandomPolicy(int grid_points, int dims, std::uint64_t seed)
      : grid_points_(grid_points), dims_(dims), gen_(mix64(seed)) {}

  ConfigIndex suggest() override {
    ConfigIndex a(dims_);
    for (int i = 0; i < dims_; ++i) a[i] = uniform_index(gen_, grid_points_);
    return a;
  }
  void observe(double) override {}

 private:
  int grid_points_;
  int dims_;
  std::mt19937_64 gen_;
};

/// One uniform configuration drawn up front and kept for the whole run.
class RandomStartPolicy : public Policy {
 public:
  RandomStartPolicy(int grid_points, int dims, std::uint64_t seed) {
    std::mt19937_64 gen(mix64(seed));
    action_.resize(dims);
    for (int i = 0; i < dims; ++i) action_[i] = uniform_index(gen, grid_points);
  }

  ConfigIndex suggest() override { return action_; }
  void observe(double) override {}

 private:
  ConfigIndex action_;
};

class FixedConfigPolicy : public Policy {
 public:
  explicit FixedConfigPolicy(ConfigIndex action) : action_(std::move(action)) {}
  ConfigIndex suggest() override { return action_; }
  void observe(double) override {}

 private:
  ConfigIndex action_;
};

/// Runs one policy against one environment trajectory. The noise-free state
/// is consumed here for the regret ledger and never shown to the policy.
inline std::vector<RegretRecord> run_episode(const LgdsParams& params, Policy& policy,
                                             long horizon, std::uint64_t env_seed,
                                             bool stationary_start = true) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  LgdsEnv env(params, env_seed, stationary_start);
  std::vector<RegretRecord> records;
  records.reserve(horizon);
  double cumulative = 0.0;
  for (long t = 0; t < horizon; ++t) {
    ConfigIndex action = policy.suggest();
    int component = 0;
    try {
      component = params.component(action);
    } catch (const std::exception& e) {
      throw std::runtime_error("policy protocol violation at step " + std::to_string(t) + ": " +
                               e.what());
    }
    const auto step = env.step_component(component);
    RegretRecord rec;
    rec.t = t;
    rec.action = std::move(action);
    rec.best_value = step.state.maxCoeff();
    rec.chosen_value = step.state[component];
    rec.instantaneous = rec.best_value - rec.chosen_value;
    cumulative += rec.instantaneous;
    rec.cumulative = cumulative;
    records.push_back(std::move(rec));
    policy.observe(step.reward);
  }
  return records;
}

/// Clairvoyant reference: picks the argmax component of the current state.
/// Its regret is identically zero; kept outside the Policy interface because
/// it reads the oracle side channel.
inline std::vector<RegretRecord> run_oracle_episode(const LgdsParams& params, long horizon,
                                                    std::uint64_t env_seed,
                                                    bool stationary_start = true) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  LgdsEnv env(params, env_seed, stationary_start);
  std::vector<RegretRecord> records;
  records.reserve(horizon);
  double cumulative = 0.0;
  for (long t = 0; t < horizon; ++t) {
    int best_component = 0;
    env.state().maxCoeff(&best_component);
    const auto step = env.step_component(best_component);
    RegretRecord rec;
    rec.t = t;
    rec.action = unflatten_index(best_component, params.grid_points(), params.dims());
    rec.best_value = step.state.maxCoeff();
    rec.chosen_value = step.state[best_component];
    rec.instantaneous = rec.best_value - rec.chosen_value;
    cumulative += rec.instantaneous;
    rec.cumulative = cumulative;
    records.push_back(std::move(rec));
  }
  return records;
}

/// Configuration with the highest summed noise-free value over the whole
/// trajectory; uses a side-channel pre-pass over the same seeded trajectory.
inline ConfigIndex best_config_in_hindsight(const LgdsParams& params, long horizon,
                                            std::uint64_t env_seed,
                                            bool stationary_start = true) {
  LgdsEnv env(params, env_seed, stationary_start);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(params.state_dim());
  for (long t = 0; t < horizon; ++t) {
    totals += env.state();
    env.step_component(0);
  }
  int best = 0;
  totals.maxCoeff(&best);
  return unflatten_index(best, params.grid_points(), params.dims());
}

// ---------------------------------------------------------------------------
// Experiment plans
// ---------------------------------------------------------------------------

enum class PolicyKind {
  hypercontroller,
  uniform_random,
  random_start,
  fixed_best_in_hindsight,
  oracle,
};

inline const std::vector<std::pair<std::string, PolicyKind>>& policy_names() {
  static const std::vector<std::pair<std::string, PolicyKind>> names = {
      {"hypercontroller", PolicyKind::hypercontroller},
      {"uniform_random", PolicyKind::uniform_random},
      {"random_start", PolicyKind::random_start},
      {"fixed_best_in_hindsight", PolicyKind::fixed_best_in_hindsight},
      {"oracle", PolicyKind::oracle},
  };
  return names;
}

inline std::string valid_policy_names() {
  std::string out;
  for (const auto& [name, kind] : policy_names()) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

inline const char* to_string(PolicyKind kind) {
  for (const auto& [name, k] : policy_names()) {
    if (k == kind) return name.c_str();
  }
  throw std::logic_error("unknown policy kind");
}

inline PolicyKind policy_kind_from_string(const std::string& name) {
  for (const auto& [n, kind] : policy_names()) {
    if (n == name) return kind;
  }
  throw std::invalid_argument("unknown policy '" + name + "' (valid: " + valid_policy_names() +
                              ")");
}

struct EnvSettings {
  int grid_points = 5;
  int dims = 2;
  double spectral_radius = 0.95;
  double process_noise = 1.0;
  double measurement_noise = 1.0;
  std::uint64_t system_seed = 0;
  bool stationary_start = true;
};

struct ExperimentPlan {
  EnvSettings env;
  long horizon = 1000;
  std::vector<std::uint64_t> seeds;
  std::vector<PolicyKind> policies;
  // controller settings used by the hypercontroller policy
  int window = 1;
  double lambda = 1.0;

  static ExperimentPlan from_json(const nlohmann::json& doc);
};

/// Parses and validates a plan document, reporting every problem in one pass.
inline ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& doc) {
  std::vector<std::string> errors;
  ExperimentPlan plan;

  if (!doc.is_object()) throw std::invalid_argument("plan must be a JSON object");
  if (doc.value("version", -1) != 1) errors.push_back("version: expected 1");

  if (!doc.contains("env") || !doc.at("env").is_object()) {
    errors.push_back("env: missing object");
  } else {
    const auto& env = doc.at("env");
    plan.env.grid_points = env.value("grid_points", 0);
    plan.env.dims = env.value("dims", 0);
    plan.env.spectral_radius = env.value("spectral_radius", -1.0);
    plan.env.process_noise = env.value("process_noise", 1.0);
    plan.env.measurement_noise = env.value("measurement_noise", 1.0);
    plan.env.system_seed = env.value("seed", std::uint64_t{0});
    plan.env.stationary_start = env.value("stationary_start", true);
    if (plan.env.grid_points < 2) errors.push_back("env.grid_points: must be >= 2");
    if (plan.env.dims < 1) errors.push_back("env.dims: must be >= 1");
    if (!(plan.env.spectral_radius > 0.0) || !(plan.env.spectral_radius < 1.0)) {
      errors.push_back("env.spectral_radius: must lie in (0, 1)");
    }
    if (plan.env.process_noise < 0.0) errors.push_back("env.process_noise: must be >= 0");
    if (plan.env.measurement_noise < 0.0) errors.push_back("env.measurement_noise: must be >= 0");
  }

  plan.horizon = doc.value("horizon", 0L);
  if (plan.horizon < 1) errors.push_back("horizon: must be >= 1");

  if (!doc.contains("seeds") || !doc.at("seeds").is_array() || doc.at("seeds").empty()) {
    errors.push_back("seeds: need a non-empty array");
  } else {
    for (const auto& s : doc.at("seeds")) plan.seeds.push_back(s.get<std::uint64_t>());
  }

  if (!doc.contains("policies") || !doc.at("policies").is_array() || doc.at("policies").empty()) {
    errors.push_back("policies: need a non-empty array");
  } else {
    for (const auto& p : doc.at("policies")) {
      try {
        plan.policies.push_back(policy_kind_from_string(p.get<std::string>()));
      } catch (const std::exception& e) {
        errors.push_back(std::string("policies: ") + e.what());
      }
    }
  }

  if (doc.contains("controller")) {
    const auto& ctl = doc.at("controller");
    plan.window = ctl.value("window", 1);
    plan.lambda = ctl.value("lambda", 1.0);
    if (plan.window < 1) errors.push_back("controller.window: must be >= 1");
    if (!(plan.lambda > 0.0)) errors.push_back("controller.lambda: must be > 0");
  }

  if (!errors.empty()) {
    std::string message = "invalid plan:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw std::invalid_argument(message);
  }
  return plan;
}

/// Unit box with one axis per environment dimension; the controller's grid
/// cells then coincide with the environment's components.
inline HyperSpace synthetic_space(int dims) {
  HyperSpace space;
  for (int i = 0; i < dims; ++i) {
    space.dims.push_back({"x" + std::to_string(i), 0.0, 1.0, Scale::linear});
  }
  return space;
}

struct EpisodeResult {
  PolicyKind policy;
  std::uint64_t seed = 0;
  std::vector<RegretRecord> records;
};

// TODO: episodes are independent; hand them to a thread pool once plans get
// big enough to care (aggregation order must stay (policy, seed)).
inline std::vector<EpisodeResult> run_plan(const ExperimentPlan& plan) {
  const LgdsParams params = generate_grid_system(
      plan.env.grid_points, plan.env.dims, plan.env.spectral_radius,
      NoiseScales{plan.env.process_noise, plan.env.measurement_noise}, plan.env.system_seed);

  std::vector<EpisodeResult> results;
  results.reserve(plan.policies.size() * plan.seeds.size());
  for (PolicyKind kind : plan.policies) {
    for (std::uint64_t seed : plan.seeds) {
      EpisodeResult result;
      result.policy = kind;
      result.seed = seed;
      // env stream keyed by the episode seed alone: every policy replays the
      // same trajectory (paired comparison)
      const std::uint64_t policy_seed = derive_seed(seed, 0x706f6c69637900ULL);
      switch (kind) {
        case PolicyKind::hypercontroller: {
          ControllerConfig config;
          config.space = synthetic_space(plan.env.dims);
          config.window = plan.window;
          config.grid_points = plan.env.grid_points;
          config.lambda = plan.lambda;
          config.seed = policy_seed;
          HyperControllerPolicy policy(std::move(config));
          result.records =
              run_episode(params, policy, plan.horizon, seed, plan.env.stationary_start);
          break;
        }
        case PolicyKind::uniform_random: {
          UniformRandomPolicy policy(plan.env.grid_points, plan.env.dims, policy_seed);
          result.records =
              run_episode(params, policy, plan.horizon, seed, plan.env.stationary_start);
          break;
        }
        case PolicyKind::random_start: {
          RandomStartPolicy policy(plan.env.grid_points, plan.env.dims, policy_seed);
          result.records =
              run_episode(params, policy, plan.horizon, seed, plan.env.stationary_start);
          break;
        }
        case PolicyKind::fixed_best_in_hindsight: {
          FixedConfigPolicy policy(
              best_config_in_hindsight(params, plan.horizon, seed, plan.env.stationary_start));
          result.records =
              run_episode(params, policy, plan.horizon, seed, plan.env.stationary_start);
          break;
        }
        case PolicyKind::oracle: {
          result.records =
              run_oracle_episode(params, plan.horizon, seed, plan.env.stationary_start);
          break;
        }
      }
      results.push_back(std::move(result));
    }
  }
  return results;
}

// ---------------------------------------------------------------------------
// Summaries and CSV emission
// ---------------------------------------------------------------------------

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

struct SummaryRow {
  std::string policy;
  long t = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Per-policy median and quartiles of cumulative regret at every step.
inline std::vector<SummaryRow> summarize(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("summarize needs at least one episode");
  std::vector<SummaryRow> rows;
  std::vector<PolicyKind> seen;
  for (const auto& r : results) {
    if (std::find(seen.begin(), seen.end(), r.policy) == seen.end()) seen.push_back(r.policy);
  }
  for (PolicyKind kind : seen) {
    std::vector<const EpisodeResult*> group;
    for (const auto& r : results) {
      if (r.policy == kind) group.push_back(&r);
    }
    const std::size_t horizon = group.front()->records.size();
    for (const auto* r : group) {
      if (r->records.size() != horizon) {
        throw std::invalid_argument("summarize: episodes have mismatched horizons");
      }
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      std::vector<double> values;
      values.reserve(group.size());
      for (const auto* r : group) values.push_back(r->records[t].cumulative);
      std::sort(values.begin(), values.end());
      rows.push_back({to_string(kind), static_cast<long>(t), quantile_sorted(values, 0.5),
                      quantile_sorted(values, 0.25), quantile_sorted(values, 0.75)});
    }
  }
  return rows;
}

inline std::string steps_csv_header() {
  return "policy,seed,t,instantaneous_regret,cumulative_regret";
}

inline std::string steps_to_csv(const std::vector<EpisodeResult>& results) {
  std::string out = steps_csv_header() + "\n";
  for (const auto& r : results) {
    const std::string prefix = std::string(to_string(r.policy)) + "," + std::to_string(r.seed) + ",";
    for (const auto& rec : r.records) {
      out += prefix + std::to_string(rec.t) + "," + format_double(rec.instantaneous) + "," +
             format_double(rec.cumulative) + "\n";
    }
  }
  return out;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "policy,t,median_cumulative_regret,q1_cumulative_regret,q3_cumulative_regret\n";
  for (const auto& row : rows) {
    out += row.policy + "," + std::to_string(row.t) + "," + format_double(row.median) + "," +
           format_double(row.q1) + "," + format_double(row.q3) + "\n";
  }
  return out;
}

/// One parsed row of the per-step schema.
struct StepsCsvRow {
  std::string policy;
  std::uint64_t seed = 0;
  long t = 0;
  double instantaneous = 0.0;
  double cumulative = 0.0;
};

/// Runs a plan and writes both CSV artifacts. Output is byte-deterministic
/// for a fixed plan document.
inline void simulate_to_files(const ExperimentPlan& plan, const std::filesystem::path& steps_path,
                              const std::filesystem::path& summary_path) {
  const auto results = run_plan(plan);
  write_text_file(steps_path, steps_to_csv(results));
  write_text_file(summary_path, summary_to_csv(summarize(results)));
}

/// Reads a per-step CSV, citing the 1-based file line of any violation.
inline std::vector<StepsCsvRow> read_steps_csv(std::istream& in, const std::string& name) {
  std::vector<StepsCsvRow> rows;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw std::invalid_argument(name + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != steps_csv_header()) {
    throw std::invalid_argument(name + ":1: expected header '" + steps_csv_header() + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != 5) {
      throw std::invalid_argument(where + ": expected 5 columns, got " +
                                  std::to_string(fields.size()));
    }
    try {
      StepsCsvRow row;
      row.policy = fields[0];
      row.seed = static_cast<std::uint64_t>(parse_long(fields[1], "seed"));
      row.t = parse_long(fields[2], "t");
      row.instantaneous = parse_double(fields[3], "instantaneous_regret");
      row.cumulative = parse_double(fields[4], "cumulative_regret");
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
  return rows;
}

struct FinalRegretRow {
  std::string policy;
  long seeds = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Final cumulative regret per policy across seeds, rows sorted by median.
inline std::vector<FinalRegretRow> final_regret_table(const std::vector<StepsCsvRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("no data rows");
  // keep the record with the largest t per (policy, seed)
  std::map<std::pair<std::string, std::uint64_t>, std::pair<long, double>> finals;
  for (const auto& row : rows) {
    auto it = finals.find({row.policy, row.seed});
    if (it == finals.end()) {
      finals[{row.policy, row.seed}] = {row.t, row.cumulative};
    } else if (row.t >= it->second.first) {
      it->second = {row.t, row.cumulative};
    }
  }
  std::map<std::string, std::vector<double>> by_policy;
  for (const auto& [key, final] : finals) by_policy[key.first].push_back(final.second);

  std::vector<FinalRegretRow> table;
  for (auto& [policy, values] : by_policy) {
    std::sort(values.begin(), values.end());
    table.push_back({policy, static_cast<long>(values.size()), quantile_sorted(values, 0.5),
                     quantile_sorted(values, 0.25), quantile_sorted(values, 0.75)});
  }
  std::sort(table.begin(), table.end(), [](const FinalRegretRow& a, const FinalRegretRow& b) {
    return a.median != b.median ? a.median < b.median : a.policy < b.policy;
  });
  return table;
}

inline std::string render_final_regret_table(const std::vector<FinalRegretRow>& table) {
  const auto pad = [](std::string text, std::size_t width) {
    while (text.size() < width) text.push_back(' ');
    return text;
  };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::string out = pad("policy", 26) + pad("seeds", 7) + pad("median_final_regret", 21) +
                    pad("q1", 13) + "q3\n";
  for (const auto& row : table) {
    out += pad(row.policy, 26) + pad(std::to_string(row.seeds), 7) + pad(num(row.median), 21) +
           pad(num(row.q1), 13) + num(row.q3) + "\n";
  }
  return out;
}

}  // namespace hyperctl
