#include <catch2/catch.hpp>

#include <array>
#include <set>
#include <vector>

#include "hyperctl/controller.hpp"

using namespace hyperctl;

namespace {

ControllerConfig single_dim_config(int grid_points, std::uint64_t seed, int window = 1) {
  ControllerConfig cfg;
  cfg.space = HyperSpace{{{"x", 0.0, 1.0, Scale::linear}}};
  cfg.window = window;
  cfg.grid_points = grid_points;
  cfg.lambda = 1.0;
  cfg.seed = seed;
  return cfg;
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("warmup draws are uniform over the grid") {
  const int d = 4;
  const int trials = 10000;
  std::array<int, 4> counts{};
  for (int trial = 0; trial < trials; ++trial) {
    Controller ctl(single_dim_config(d, static_cast<std::uint64_t>(trial)));
    ++counts[ctl.suggest().index[0]];
  }
  for (int a = 0; a < d; ++a) {
    const double freq = static_cast<double>(counts[a]) / trials;
    REQUIRE(freq == Approx(0.25).margin(0.02));
  }
}

TEST_CASE("all-zero predictions tie and the tie break is uniform") {
  const int d = 5;
  const int trials = 4000;
  std::vector<int> counts(d, 0);
  for (int trial = 0; trial < trials; ++trial) {
    Controller ctl(single_dim_config(d, 1000 + static_cast<std::uint64_t>(trial)));
    ctl.suggest();
    ctl.observe(1.0);  // past warmup; no models yet, so every prediction is 0
    ++counts[ctl.suggest().index[0]];
  }
  for (int a = 0; a < d; ++a) {
    const double freq = static_cast<double>(counts[a]) / trials;
    REQUIRE(freq == Approx(1.0 / d).margin(0.03));
  }
}

TEST_CASE("greedy selection picks the argmax of the predicted rewards") {
  Controller ctl(single_dim_config(3, 99));
  const auto first = ctl.suggest();
  ctl.observe(1.0);
  const std::vector<int> context{first.index[0]};
  // predictions for xi = [1]: 0.1, -0.5, 0.7
  ctl.model(0, context, 0).update(vec1(1.0), 0.2);
  ctl.model(0, context, 1).update(vec1(1.0), -1.0);
  ctl.model(0, context, 2).update(vec1(1.0), 1.4);

  const auto suggestion = ctl.suggest();
  REQUIRE(suggestion.index[0] == 2);
  REQUIRE_FALSE(suggestion.explored[0]);
}

TEST_CASE("observed rewards reach the model picked at suggest time") {
  Controller ctl(single_dim_config(4, 11));
  const int warmup_action = ctl.suggest().index[0];
  ctl.observe(2.0);  // window is now [2]
  const auto suggestion = ctl.suggest();
  ctl.observe(3.0);
  const RidgeModel* model = ctl.find_model(0, {warmup_action}, suggestion.index[0]);
  REQUIRE(model != nullptr);
  // one absorbed pair (xi = [2], reward = 3) on top of lambda = 1
  REQUIRE(model->gram()(0, 0) == 5.0);
  REQUIRE(model->moment()(0, 0) == 6.0);
  REQUIRE(model->coefficients()(0) == Approx(1.2).margin(1e-15));
  REQUIRE(ctl.model_count() == 1);
}

TEST_CASE("suggest and observe must alternate strictly") {
  Controller ctl(single_dim_config(3, 7));
  REQUIRE_THROWS_AS(ctl.observe(1.0), std::logic_error);
  ctl.suggest();
  REQUIRE_THROWS_AS(ctl.suggest(), std::logic_error);
  ctl.observe(1.0);
  REQUIRE_THROWS_AS(ctl.observe(1.0), std::logic_error);
}

TEST_CASE("rewards must be finite") {
  Controller ctl(single_dim_config(3, 7));
  ctl.suggest();
  REQUIRE_THROWS_AS(ctl.observe(std::nan("")), std::invalid_argument);
  REQUIRE_THROWS_AS(ctl.observe(std::numeric_limits<double>::infinity()), std::invalid_argument);
  ctl.observe(0.0);  // still in the reward phase, valid input proceeds
}

TEST_CASE("equal config and seed give identical suggestion sequences") {
  ControllerConfig cfg;
  cfg.space = HyperSpace{{{"x", 0.0, 1.0, Scale::linear}, {"y", 1e-4, 1.0, Scale::log10}}};
  cfg.window = 2;
  cfg.grid_points = 4;
  cfg.seed = 321;
  Controller a(cfg), b(cfg);
  std::mt19937_64 rewards(5);
  for (int t = 0; t < 60; ++t) {
    const auto sa = a.suggest();
    const auto sb = b.suggest();
    REQUIRE(sa.index == sb.index);
    REQUIRE(sa.values == sb.values);
    const double reward = normal_sample(rewards);
    a.observe(reward);
    b.observe(reward);
  }
}

TEST_CASE("each dimension behaves like an independent single-dimension controller") {
  ControllerConfig joint;
  joint.space = HyperSpace{{{"x0", 0.0, 1.0, Scale::linear},
                            {"x1", 0.0, 1.0, Scale::linear},
                            {"x2", 0.0, 1.0, Scale::linear}}};
  joint.window = 1;
  joint.grid_points = 5;
  joint.seed = 777;
  Controller whole(joint);

  std::vector<Controller> parts;
  for (int i = 0; i < 3; ++i) {
    // the per-dimension stream seed is additive in the dimension index, so
    // shifting the master seed aligns a single-dimension controller with
    // dimension i of the joint one
    parts.emplace_back(single_dim_config(5, joint.seed + kGoldenGamma * static_cast<std::uint64_t>(i)));
  }

  std::mt19937_64 rewards(11);
  for (int t = 0; t < 80; ++t) {
    const auto joint_suggestion = whole.suggest();
    for (int i = 0; i < 3; ++i) {
      REQUIRE(parts[i].suggest().index[0] == joint_suggestion.index[i]);
    }
    const double reward = normal_sample(rewards);
    whole.observe(reward);
    for (auto& part : parts) part.observe(reward);
  }
}

TEST_CASE("shifting every prediction by a constant leaves the choice unchanged") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    Controller base(single_dim_config(4, seed));
    Controller shifted(single_dim_config(4, seed));
    const int context_action = base.suggest().index[0];
    REQUIRE(shifted.suggest().index[0] == context_action);
    base.observe(1.0);
    shifted.observe(1.0);
    const std::vector<int> context{context_action};
    const double shift = 5.0;  // xi = [1], so adding 2c to the reward shifts G by c
    for (int a = 0; a < 4; ++a) {
      const double reward = 0.5 * a - 0.25;
      base.model(0, context, a).update(vec1(1.0), reward);
      shifted.model(0, context, a).update(vec1(1.0), reward + 2.0 * shift);
    }
    REQUIRE(base.suggest().index == shifted.suggest().index);
  }
}

TEST_CASE("materialized model count stays within the table bound") {
  ControllerConfig cfg;
  cfg.space = HyperSpace{{{"x", 0.0, 1.0, Scale::linear}, {"y", 0.0, 1.0, Scale::linear}}};
  cfg.window = 1;
  cfg.grid_points = 3;
  cfg.seed = 5;
  Controller ctl(cfg);
  std::mt19937_64 rewards(2);
  for (int t = 0; t < 400; ++t) {
    ctl.suggest();
    ctl.observe(normal_sample(rewards));
  }
  const std::size_t bound = 2 * 3 * 3;  // h * d^{window+1}
  REQUIRE(ctl.model_count() <= bound);
  REQUIRE(ctl.model_count() > 0);

  // tighter form: at most d models per distinct (dimension, context) pair
  std::set<std::pair<int, std::vector<int>>> contexts;
  for (const auto& [key, model] : ctl.models()) contexts.insert({key.dim, key.context});
  REQUIRE(ctl.model_count() <= contexts.size() * 3);
}

TEST_CASE("snapshot then restore reproduces future behavior exactly") {
  ControllerConfig cfg;
  cfg.space = HyperSpace{{{"x", 0.0, 1.0, Scale::linear}, {"y", 0.0, 1.0, Scale::linear}}};
  cfg.window = 2;
  cfg.grid_points = 4;
  cfg.seed = 99;
  Controller original(cfg);
  std::mt19937_64 rewards(3);
  for (int t = 0; t < 25; ++t) {
    original.suggest();
    original.observe(normal_sample(rewards));
  }
  Controller restored = Controller::restore(original.snapshot());
  std::mt19937_64 rewards_a = rewards, rewards_b = rewards;
  for (int t = 0; t < 25; ++t) {
    const auto sa = original.suggest();
    const auto sb = restored.suggest();
    REQUIRE(sa.index == sb.index);
    original.observe(normal_sample(rewards_a));
    restored.observe(normal_sample(rewards_b));
  }
}

TEST_CASE("snapshot serializes the iteration counter and mid-pair state") {
  Controller ctl(single_dim_config(3, 13));
  REQUIRE(ctl.snapshot().at("iteration").get<long>() == 0);
  ctl.suggest();
  const auto mid = ctl.snapshot();
  REQUIRE(mid.at("phase").get<std::string>() == "awaiting_reward");
  Controller resumed = Controller::restore(mid);
  ctl.observe(2.0);
  resumed.observe(2.0);
  REQUIRE(ctl.suggest().index == resumed.suggest().index);
  REQUIRE(ctl.snapshot().at("iteration").get<long>() == 1);
}

TEST_CASE("restore rejects tampered documents") {
  Controller ctl(single_dim_config(3, 21, /*window=*/1));
  for (int t = 0; t < 3; ++t) {
    ctl.suggest();
    ctl.observe(1.0);
  }
  const auto good = ctl.snapshot();
  REQUIRE_NOTHROW(Controller::restore(good));

  auto wrong_window = good;
  wrong_window["window"] = 2;  // histories and window no longer line up
  REQUIRE_THROWS_AS(Controller::restore(wrong_window), std::invalid_argument);

  auto wrong_version = good;
  wrong_version["version"] = 99;
  REQUIRE_THROWS_AS(Controller::restore(wrong_version), std::invalid_argument);

  auto wrong_kind = good;
  wrong_kind["kind"] = "other";
  REQUIRE_THROWS_AS(Controller::restore(wrong_kind), std::invalid_argument);

  auto bad_action = good;
  bad_action["history"][0][0] = 17;
  REQUIRE_THROWS_AS(Controller::restore(bad_action), std::invalid_argument);

  REQUIRE_FALSE(good.at("models").empty());
  auto bad_coeff = good;
  bad_coeff["models"][0]["g"][0] = 123.0;  // no longer the solution for (v, b)
  REQUIRE_THROWS_AS(Controller::restore(bad_coeff), std::invalid_argument);
}

TEST_CASE("warmup lasts window iterations and skips model updates") {
  Controller ctl(single_dim_config(4, 31, /*window=*/3));
  for (int t = 0; t < 3; ++t) {
    const auto suggestion = ctl.suggest();
    REQUIRE(suggestion.explored[0]);
    ctl.observe(1.0 + t);
    REQUIRE(ctl.model_count() == 0);
  }
  const auto first_greedy = ctl.suggest();
  REQUIRE_FALSE(first_greedy.explored[0]);
  ctl.observe(4.0);
  REQUIRE(ctl.model_count() == 1);
}

TEST_CASE("controller config validation") {
  auto cfg = single_dim_config(3, 0);
  cfg.window = 0;
  REQUIRE_THROWS_AS(Controller{cfg}, std::invalid_argument);
  cfg = single_dim_config(1, 0);
  REQUIRE_THROWS_AS(Controller{cfg}, std::invalid_argument);
  cfg = single_dim_config(3, 0);
  cfg.lambda = 0.0;
  REQUIRE_THROWS_AS(Controller{cfg}, std::invalid_argument);
}
