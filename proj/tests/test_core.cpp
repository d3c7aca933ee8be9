#include <doctest.h>

#include <cmath>
#include <random>

#include "dualstruct/core.hpp"

using namespace dualstruct;

TEST_CASE("mean reward examples") {
  const auto P = RewardMatrix::bernoulli({0.5, 0.8});
  CHECK(mean_reward(P, 1) == doctest::Approx(0.8));
  CHECK(mean_reward(P, 0) == doctest::Approx(0.5));
  Eigen::MatrixXd m(3, 1);
  m << 0.2, 0.3, 0.5;
  RewardMatrix Q(RewardSupport({0.0, 0.5, 1.0}), m);
  CHECK(mean_reward(Q, 0) == doctest::Approx(0.65));
}

TEST_CASE("best arm, ties and gaps") {
  const auto P = RewardMatrix::bernoulli({0.5, 0.8});
  const auto b = best_arm_and_value(P);
  CHECK(b.arm == 1);
  CHECK(b.value == doctest::Approx(0.8));
  CHECK(gap(P, 0) == doctest::Approx(0.3));
  CHECK(gap(P, 1) == 0.0);
  CHECK(best_arm_and_value(RewardMatrix::bernoulli({0.4})).arm == 0);
  CHECK(best_arm_and_value(RewardMatrix::bernoulli({0.3, 0.6, 0.6})).arm == 1);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> means{U(rng), U(rng), U(rng)};
    const auto Q = RewardMatrix::bernoulli(means);
    const double top = *std::max_element(means.begin(), means.end());
    for (int x = 0; x < 3; ++x) {
      CHECK(gap(Q, x) == doctest::Approx(top - means[x]));
      CHECK(gap(Q, x) >= 0.0);
    }
  }
}

TEST_CASE("support validation") {
  CHECK_THROWS(RewardSupport({0.5}));
  CHECK_THROWS(RewardSupport({0.5, 0.2}));
  CHECK_THROWS(RewardSupport({0.0, 1.5}));
  CHECK(RewardSupport::uniform_grid(11)[3] == doctest::Approx(0.3));
}

TEST_CASE("pseudo regret") {
  const auto P = RewardMatrix::bernoulli({0.5, 0.8});
  CHECK(pseudo_regret(P, std::vector<int>(10, 1)) == 0.0);
  CHECK(pseudo_regret(P, std::vector<int>(10, 0)) == doctest::Approx(3.0));
  CHECK(pseudo_regret(P, {0, 1, 0, 1, 1}) == doctest::Approx(0.6));
}

TEST_CASE("observation recurrence matches the histogram") {
  ObservationLog log(RewardSupport::bernoulli(), 1);
  log.record(0, 0.0);
  CHECK(log.empirical()(0, 0) == 1.0);
  log.record(0, 1.0);
  CHECK(log.empirical()(0, 0) == doctest::Approx(0.5));
  CHECK(log.empirical()(1, 0) == doctest::Approx(0.5));
  CHECK(log.count(0) == 2);
  CHECK_THROWS(log.record(0, 0.5));

  const auto grid = RewardSupport::uniform_grid(4);
  ObservationLog big(grid, 3);
  std::vector<std::vector<long>> hist(3, std::vector<long>(4, 0));
  std::mt19937_64 rng(11);
  for (int k = 0; k < 25000; ++k) {
    const int x = static_cast<int>(rng() % 3), r = static_cast<int>(rng() % 4);
    big.record_level(x, r);
    ++hist[x][r];
  }
  for (int x = 0; x < 3; ++x) {
    double s = 0.0;
    for (int r = 0; r < 4; ++r) {
      CHECK(big.empirical()(r, x) == doctest::Approx(double(hist[x][r]) / big.count(x)).epsilon(1e-12));
      s += big.empirical()(r, x);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }

  ObservationLog same(RewardSupport::bernoulli(), 1);
  for (int k = 0; k < 20; ++k) same.record(0, 1.0);
  CHECK(same.empirical()(1, 0) == 1.0);
  CHECK(same.empirical()(0, 0) == 0.0);
}
