#include <catch2/catch.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "hyperctl/linalg.hpp"
#include "hyperctl/ridge.hpp"
#include "hyperctl/rng.hpp"
#include "test_support.hpp"

using namespace hyperctl;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("single update matches the closed form by hand") {
  RidgeModel model(1, 1.0);
  model.update(vec1(2.0), 3.0);
  // V = 1 + 2*2 = 5, B = 3*2 = 6, G = 6/5
  REQUIRE(model.gram()(0, 0) == 5.0);
  REQUIRE(model.moment()(0, 0) == 6.0);
  REQUIRE(model.coefficients()(0) == Approx(1.2).margin(1e-15));
  REQUIRE(model.updates() == 1);
  REQUIRE(model.predict(vec1(2.0)) == Approx(2.4).margin(1e-14));
}

TEST_CASE("zero rewards keep zero coefficients") {
  RidgeModel model(3, 1.0);
  std::mt19937_64 gen(5);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd xi(3);
    for (int i = 0; i < 3; ++i) xi[i] = normal_sample(gen);
    model.update(xi, 0.0);
  }
  REQUIRE(model.moment().norm() == 0.0);
  REQUIRE(model.coefficients().norm() == 0.0);
}

TEST_CASE("fresh models predict zero everywhere") {
  RidgeModel model(2, 0.5);
  REQUIRE(model.predict((Eigen::VectorXd(2) << 3.0, -7.0).finished()) == 0.0);
  REQUIRE(model.updates() == 0);
}

TEST_CASE("prediction is the plain inner product") {
  const auto model = RidgeModel::from_state(2.0 * Eigen::MatrixXd::Identity(2, 2),
                                            (Eigen::RowVectorXd(2) << 1.0, -2.0).finished(),
                                            (Eigen::VectorXd(2) << 0.5, -1.0).finished(), 1);
  REQUIRE(model.predict((Eigen::VectorXd(2) << 2.0, 1.0).finished()) == Approx(0.0).margin(1e-15));
}

TEST_CASE("recursive coefficients match the batch normal equations") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> normal;
  for (int s : {1, 2, 3}) {
    RidgeModel model(s, 1.0);
    std::vector<Eigen::VectorXd> regressors;
    std::vector<double> rewards;
    for (int k = 0; k < 50; ++k) {
      Eigen::VectorXd xi(s);
      for (int i = 0; i < s; ++i) xi[i] = normal(gen);
      const double reward = normal(gen);
      model.update(xi, reward);
      regressors.push_back(xi);
      rewards.push_back(reward);
      const auto expected = testsupport::batch_ridge_coefficients(regressors, rewards, 1.0);
      REQUIRE(testsupport::relative_error(model.coefficients(), expected) < 1e-10);
    }
  }
}

TEST_CASE("long update streams stay on the batch solution") {
  std::mt19937_64 gen(23);
  std::normal_distribution<double> normal;
  for (int s : {1, 2, 3}) {
    for (double lambda : {0.1, 1.0, 10.0}) {
      RidgeModel model(s, lambda);
      std::vector<Eigen::VectorXd> regressors;
      std::vector<double> rewards;
      for (int k = 0; k < 1000; ++k) {
        Eigen::VectorXd xi(s);
        for (int i = 0; i < s; ++i) xi[i] = normal(gen);
        const double reward = normal(gen);
        model.update(xi, reward);
        regressors.push_back(xi);
        rewards.push_back(reward);
      }
      const auto expected = testsupport::batch_ridge_coefficients(regressors, rewards, lambda);
      REQUIRE(testsupport::relative_error(model.coefficients(), expected) < 1e-10);
    }
  }
}

TEST_CASE("gram eigenvalues never drop below lambda and never decrease") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> normal;
  const double lambda = 0.7;
  RidgeModel model(3, lambda);
  double previous_min = lambda;
  for (int k = 0; k < 40; ++k) {
    Eigen::VectorXd xi(3);
    for (int i = 0; i < 3; ++i) xi[i] = normal(gen);
    model.update(xi, normal(gen));
    const double min_eig = min_eigenvalue_sym(model.gram());
    REQUIRE(min_eig >= lambda - 1e-12);
    REQUIRE(min_eig >= previous_min - 1e-9);
    previous_min = min_eig;
  }
}

TEST_CASE("prediction is linear in the regressor") {
  std::mt19937_64 gen(37);
  std::normal_distribution<double> normal;
  RidgeModel model(3, 1.0);
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd xi(3);
    for (int i = 0; i < 3; ++i) xi[i] = normal(gen);
    model.update(xi, normal(gen));
  }
  Eigen::VectorXd x(3), y(3);
  for (int i = 0; i < 3; ++i) {
    x[i] = normal(gen);
    y[i] = normal(gen);
  }
  const double alpha = 1.75, beta = -0.5;
  REQUIRE(model.predict(alpha * x + beta * y) ==
          Approx(alpha * model.predict(x) + beta * model.predict(y)).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("updates commute: permuted dyadic streams give identical state") {
  // entries are small multiples of 1/4, so every partial sum is exact and
  // reordering cannot change V or B even at the bit level
  std::mt19937_64 gen(41);
  const int s = 2;
  std::vector<Eigen::VectorXd> regressors;
  std::vector<double> rewards;
  for (int k = 0; k < 24; ++k) {
    Eigen::VectorXd xi(s);
    for (int i = 0; i < s; ++i) xi[i] = static_cast<double>(uniform_index(gen, 17) - 8) / 4.0;
    regressors.push_back(xi);
    rewards.push_back(static_cast<double>(uniform_index(gen, 17) - 8) / 4.0);
  }
  RidgeModel forward(s, 1.0), backward(s, 1.0), shuffled(s, 1.0);
  for (std::size_t k = 0; k < regressors.size(); ++k) forward.update(regressors[k], rewards[k]);
  for (std::size_t k = regressors.size(); k-- > 0;) backward.update(regressors[k], rewards[k]);
  std::vector<std::size_t> order(regressors.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), gen);
  for (std::size_t k : order) shuffled.update(regressors[k], rewards[k]);

  REQUIRE(forward.gram() == backward.gram());
  REQUIRE(forward.moment() == backward.moment());
  REQUIRE(forward.coefficients() == backward.coefficients());
  REQUIRE(forward.gram() == shuffled.gram());
  REQUIRE(forward.coefficients() == shuffled.coefficients());
}

TEST_CASE("non-finite inputs are rejected") {
  RidgeModel model(1, 1.0);
  REQUIRE_THROWS_AS(model.update(vec1(std::numeric_limits<double>::infinity()), 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(model.update(vec1(1.0), std::nan("")), std::invalid_argument);
  REQUIRE_THROWS_AS(model.predict(vec1(std::nan(""))), std::invalid_argument);
  REQUIRE_THROWS_AS(model.update((Eigen::VectorXd(2) << 1.0, 2.0).finished(), 1.0),
                    std::invalid_argument);
}

TEST_CASE("invert_spd round trips on identity, scalar and random matrices") {
  REQUIRE(invert_spd(Eigen::MatrixXd::Identity(2, 2)) == Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd scalar(1, 1);
  scalar << 5.0;
  REQUIRE(invert_spd(scalar)(0, 0) == Approx(0.2).margin(1e-15));

  std::mt19937_64 gen(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd v = testsupport::random_spd(3, gen);
    const Eigen::MatrixXd product = v * invert_spd(v);
    REQUIRE((product - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("invert_spd signals non positive definite input") {
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  REQUIRE_THROWS_AS(invert_spd(indefinite), std::invalid_argument);
  REQUIRE_THROWS_AS(invert_spd(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("reward window keeps the last s rewards oldest first") {
  RewardWindow window(3);
  REQUIRE_FALSE(window.full());
  window.push(1.0);
  window.push(2.0);
  REQUIRE(window.size() == 2);
  window.push(3.0);
  REQUIRE(window.full());
  window.push(4.0);
  REQUIRE(window.size() == 3);
  const Eigen::VectorXd xi = window.as_vector();
  REQUIRE(xi(0) == 2.0);
  REQUIRE(xi(1) == 3.0);
  REQUIRE(xi(2) == 4.0);
  REQUIRE_THROWS_AS(window.push(std::nan("")), std::invalid_argument);
  REQUIRE_THROWS_AS(RewardWindow(0), std::invalid_argument);
}
