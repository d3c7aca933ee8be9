#include <doctest.h>

#include <cmath>
#include <random>

#include "dualstruct/policies.hpp"

using namespace dualstruct;

namespace {

StructureSpec two_arm_spec() { return StructureSpec::separable(RewardSupport::bernoulli(), 2); }

// Feeds a fixed list of (arm, level) observations into the state's log.
void feed(DusaState& st, int arm, int ones, int zeros) {
  for (int k = 0; k < ones; ++k) st.log.record_level(arm, 1);
  for (int k = 0; k < zeros; ++k) st.log.record_level(arm, 0);
}

bool same_duals(const std::vector<DualVars>& a, const std::vector<DualVars>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].alpha != b[i].alpha || a[i].beta != b[i].beta || a[i].lambda != b[i].lambda || a[i].aux != b[i].aux)
      return false;
  return true;
}

std::vector<std::pair<StructureSpec, RewardMatrix>> deceitful_instances() {
  std::vector<std::pair<StructureSpec, RewardMatrix>> out;
  out.emplace_back(two_arm_spec(), RewardMatrix::bernoulli({0.7, 0.3}));
  out.emplace_back(StructureSpec::separable(RewardSupport::bernoulli(), 3), RewardMatrix::bernoulli({0.4, 0.65, 0.5}));
  out.emplace_back(StructureSpec::lipschitz_line({0.1, 0.35, 0.8}, 0.5), RewardMatrix::bernoulli({0.55, 0.6, 0.45}));
  Eigen::MatrixXd F(3, 2);
  F << 0.2, 1, 0.5, 1, 0.9, 1;
  out.emplace_back(StructureSpec::linear(RewardSupport::bernoulli(), F), RewardMatrix::bernoulli({0.3, 0.45, 0.69}));
  return out;
}

}  // namespace

TEST_CASE("dusa_init validates the accuracy and sets the initial duals") {
  const auto spec = StructureSpec::separable(RewardSupport::bernoulli(), 3);
  CHECK_NOTHROW(dusa_init(spec, {0.2, 2000.0, false}));
  CHECK_THROWS_AS(dusa_init(spec, {0.5, 2000.0, false}), std::invalid_argument);
  CHECK_THROWS_AS(dusa_init(spec, {1.0 / 3.0, 2000.0, false}), std::invalid_argument);
  CHECK_THROWS_AS(dusa_init(spec, {0.0, 2000.0, false}), std::invalid_argument);
  CHECK_THROWS_AS(dusa_init(spec, {0.1, 0.0, false}), std::invalid_argument);
  DusaState st = dusa_init(spec, {0.1, 2000.0, false});
  CHECK(st.s == 0);
  CHECK(st.eta_ref == RateVector::Ones(3));
  for (const auto& m : st.mu) CHECK(m.is_zero());
  // Rounds 1..3 pull arms 0..2; afterwards the observed level has all the mass.
  for (long t = 1; t <= 3; ++t) {
    const auto d = dusa_step(st, t);
    CHECK(d.arm == t - 1);
    CHECK(d.phase == Phase::init);
    st.log.record_level(d.arm, t == 2 ? 1 : 0);
  }
  CHECK(st.log.empirical()(1, 1) == 1.0);
  CHECK(st.log.empirical()(0, 0) == 1.0);
  CHECK(st.s == 0);
}

TEST_CASE("sufficient information test") {
  DusaState st = dusa_init(two_arm_spec(), {1e-3, 2000.0, false});
  feed(st, 0, 1, 1);
  feed(st, 1, 0, 5);
  // mu = 0 makes every dual test zero, which fails a positive threshold.
  auto test = sufficient_info_test(st, 8);
  CHECK_FALSE(test.pass);
  CHECK(test.threshold == doctest::Approx((1.0 - std::exp(-8.0 / 2000.0)) * 1.001).epsilon(1e-14));
  CHECK(test.values[1] == 0.0);
  CHECK(std::isnan(test.values[0]));
  CHECK(sufficient_info_test(st, 10000000).threshold == doctest::Approx(1.001).epsilon(1e-12));

  // An empirical best at the top reward leaves nothing deceitful: the test passes vacuously.
  DusaState top = dusa_init(two_arm_spec(), {1e-3, 2000.0, false});
  feed(top, 0, 3, 0);
  feed(top, 1, 1, 2);
  CHECK(sufficient_info_test(top, 6).pass);
}

TEST_CASE("dusa_step exploration branches by hand") {
  SUBCASE("empirical best is pulled when it is not ahead of the tracked arm") {
    DusaState st = dusa_init(two_arm_spec(), {1e-3, 2000.0, false});
    feed(st, 0, 1, 1);  // N = 2, mean 0.5
    feed(st, 1, 1, 4);  // N = 5, mean 0.2
    const auto d = dusa_step(st, 8);
    // mu = 0: the shallow update is infeasible, every rate is +inf and x-bar is arm 1.
    REQUIRE(d.eta.size() == 2);
    CHECK(std::isinf(d.eta[1]));
    CHECK(d.arm == 0);
    CHECK(d.phase == Phase::explore_optimal);
    CHECK(st.s == 1);
    CHECK(st.log.explorations() == 1);
    // The deep update replaced the duals of the deceitful arm.
    CHECK_FALSE(st.mu[1].is_zero());
    CHECK(dual_feasible(dual_cone(st.spec), st.mu[1]));
  }
  SUBCASE("tracked arm is pulled when the best arm is ahead") {
    DusaState st = dusa_init(two_arm_spec(), {1e-3, 2000.0, false});
    feed(st, 0, 3, 2);  // N = 5, mean 0.6
    feed(st, 1, 1, 1);  // N = 2, mean 0.5
    const auto d = dusa_step(st, 8);
    CHECK(d.arm == 1);
    CHECK(d.phase == Phase::explore_rate);
  }
  SUBCASE("least-pulled arm once the forced-exploration level is reached") {
    DusaState st = dusa_init(two_arm_spec(), {0.4, 2000.0, false});
    feed(st, 0, 30, 20);
    feed(st, 1, 0, 1);
    st.s = 100;
    // 1 <= 0.4 * 100 / (1 + log 101) = 7.13
    REQUIRE(1.0 <= 0.4 * 100.0 / (1.0 + std::log(101.0)));
    const auto d = dusa_step(st, 52);
    CHECK(d.arm == 1);
    CHECK(d.phase == Phase::explore_least);
    CHECK(st.s == 101);
  }
  SUBCASE("below the forced-exploration level the rate rule decides") {
    DusaState st = dusa_init(two_arm_spec(), {0.05, 2000.0, false});
    feed(st, 0, 30, 20);
    feed(st, 1, 0, 1);
    st.s = 100;
    // 1 > 0.05 * 100 / (1 + log 101) = 0.89
    REQUIRE(1.0 > 0.05 * 100.0 / (1.0 + std::log(101.0)));
    const auto d = dusa_step(st, 52);
    CHECK(d.phase != Phase::explore_least);
    CHECK(d.phase == Phase::explore_rate);
    CHECK(d.arm == 1);
  }
}

TEST_CASE("dusa_step exploits once the information suffices and leaves the duals alone") {
  DusaState st = dusa_init(two_arm_spec(), {1e-3, 2000.0, false});
  feed(st, 0, 700, 300);
  feed(st, 1, 90, 210);
  const auto deep = deep_update(st.spec, st.log.empirical(), 1e-3);
  REQUIRE(deep.ok());
  st.mu = deep.mu;
  st.eta_ref = deep.eta;
  const auto mu_before = st.mu;
  const RateVector eta_before = st.eta_ref;
  const auto d = dusa_step(st, 1301);
  CHECK(d.phase == Phase::exploit);
  CHECK(d.arm == 0);
  CHECK(d.tests[1] >= d.threshold);
  CHECK(st.s == 0);
  CHECK(same_duals(st.mu, mu_before));
  CHECK(st.eta_ref == eta_before);
}

TEST_CASE("exploit prefers the least-played of tied empirical best arms") {
  DusaState st = dusa_init(StructureSpec::separable(RewardSupport::bernoulli(), 3), {1e-3, 2000.0, false});
  feed(st, 0, 1, 0);
  feed(st, 1, 2, 0);
  feed(st, 2, 0, 3);
  // Best mean is the top reward, so nothing is deceitful and the test passes.
  const auto d = dusa_step(st, 7);
  CHECK(d.phase == Phase::exploit);
  CHECK(d.arm == 0);
}

TEST_CASE("shallow update") {
  const auto spec = two_arm_spec();
  const auto P = RewardMatrix::bernoulli({0.7, 0.3});
  std::vector<DualVars> zero(2, DualVars::zeros(2, 2));
  const auto inf = shallow_update(spec, P, RateVector::Ones(2), zero, 1e-3);
  CHECK(inf.infeasible);
  CHECK(std::isinf(inf.eta[0]));
  CHECK(std::isinf(inf.eta[1]));

  const auto none = shallow_update(spec, RewardMatrix::bernoulli({1.0, 0.3}), RateVector::Ones(2), zero, 1e-3);
  CHECK_FALSE(none.infeasible);
  CHECK(none.eta.isZero());

  for (const auto& [sp, Q] : deceitful_instances()) {
    const auto cls = classify_arms(sp, Q);
    REQUIRE_FALSE(cls.deceitful.empty());
    const auto deep = deep_update(sp, Q, 1e-4);
    REQUIRE(deep.ok());
    for (bool strict : {false, true}) {
      INFO(to_string(sp.kind) << (strict ? " strict" : " relaxed"));
      const auto sh = shallow_update(sp, Q, deep.eta, deep.mu, 1e-3, strict);
      REQUIRE(sh.status == SolveStatus::optimal);
      for (int xp : cls.deceitful) CHECK(dual_test(sh.eta, xp, Q, deep.mu[xp]) >= 1.0 - 1e-6);
      // The deep rates meet these constraints, and every feasible point is an upper bound on C.
      const auto tight = shallow_update(sp, Q, deep.eta, deep.mu, 1e-7);
      REQUIRE(tight.status == SolveStatus::optimal);
      CHECK(tight.value <= deep.value + 1e-6 * std::max(1.0, deep.value));
      CHECK(sh.value <= tight.value + (strict ? 2.0 : 1.0) * 1e-3 + 1e-6);
      CHECK(sh.value >= deep.value - 1e-3 * std::max(1.0, deep.value));
    }
  }
}

TEST_CASE("deep update") {
  const auto empty = deep_update(two_arm_spec(), RewardMatrix::bernoulli({1.0, 0.2}), 1e-3);
  CHECK(empty.ok());
  CHECK(empty.eta.isZero());
  for (const auto& m : empty.mu) CHECK(m.is_zero());

  for (const auto& [spec, P] : deceitful_instances()) {
    const auto cls = classify_arms(spec, P);
    const auto fresh = lower_bound_dual(spec, P, 1e-7);
    REQUIRE(fresh.ok());
    const double C = fresh.value;
    const ConeDescription cone = dual_cone(spec);
    for (bool strict : {false, true}) {
      INFO(to_string(spec.kind) << (strict ? " strict" : " relaxed"));
      const double eps = 1e-3;
      const auto d = deep_update(spec, P, eps, strict);
      REQUIRE(d.ok());
      for (int xp : cls.deceitful) {
        CHECK(dual_test(d.eta, xp, P, d.mu[xp]) >= 1.0 - 1e-6);
        CHECK(dual_value(d.eta, xp, P, d.mu[xp]) >= 1.0 - 1e-6);
        CHECK(dual_feasible(cone, d.mu[xp], 1e-7));
      }
      double sum = 0.0, gaps = 0.0;
      for (int x = 0; x < P.arms(); ++x) {
        sum += d.eta[x] * gap(P, x);
        gaps += gap(P, x);
      }
      CHECK(sum == doctest::Approx(d.value).epsilon(1e-12));
      CHECK(d.value <= C + eps + 1e-6 * std::max(1.0, C));
      CHECK(d.value >= C - 1e-6 * std::max(1.0, C));
      if (strict)
        for (int x : suboptimal_arms(P)) CHECK(d.eta[x] >= eps / (2.0 * gaps) - 1e-9);
    }
  }
}

TEST_CASE("KL-UCB index") {
  for (long t : {3L, 10L, 1000L}) {
    const double q = klucb_index(0.0, 1, std::log(static_cast<double>(t)));
    CHECK(std::abs(q - (1.0 - 1.0 / t)) <= 2e-9);
  }
  CHECK(klucb_index(1.0, 5, 2.0) == 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double mean = U(rng);
    const long n = 1 + static_cast<long>(50 * U(rng));
    const double f = 0.1 + 5 * U(rng);
    const double q = klucb_index(mean, n, f);
    CHECK(q >= mean);
    CHECK(q <= 1.0);
    CHECK(klucb_index(mean, n, f + 0.5) >= q);
    if (q < 1.0 - 1e-6) CHECK(static_cast<double>(n) * bernoulli_kl(mean, q) <= f + 1e-6);
  }
  // Equal statistics: the lowest index wins.
  ObservationLog log(RewardSupport::bernoulli(), 3);
  for (int x = 0; x < 3; ++x) log.record_level(x, x == 1 ? 0 : 1);
  log.record_level(0, 0);
  log.record_level(1, 1);
  log.record_level(2, 0);
  CHECK(klucb_step(log, 7) == 0);
  CHECK(klucb_step(log, 2) == 1);  // initialization round
}

TEST_CASE("UCB1") {
  ObservationLog log(RewardSupport::bernoulli(), 2);
  for (int k = 0; k < 10; ++k) log.record_level(0, k % 2);
  for (int k = 0; k < 4; ++k) log.record_level(1, k % 2);
  CHECK(ucb1_step(log, 20) == 1);

  // A fresh arm against a heavily pulled one: the bonus wins exactly when it beats the gap.
  ObservationLog big(RewardSupport::bernoulli(), 2);
  for (int k = 0; k < 1000; ++k) big.record_level(0, k % 10 < 9);  // mean 0.9
  big.record_level(1, 0);                                            // mean 0
  const long t = 1001;
  const double bonus_fresh = std::sqrt(2.0 * std::log(static_cast<double>(t)));
  const double bonus_old = std::sqrt(2.0 * std::log(static_cast<double>(t)) / 1000.0);
  REQUIRE(bonus_fresh > 0.9 + bonus_old);
  CHECK(ucb1_step(big, t) == 1);

  ObservationLog settled(RewardSupport::bernoulli(), 2);
  for (int k = 0; k < 100000; ++k) {
    settled.record_level(0, k % 10 < 6);
    settled.record_level(1, k % 10 < 5);
  }
  CHECK(ucb1_step(settled, 200000) == 0);
}

TEST_CASE("OSSB-style tracker follows its rule") {
  const auto spec = StructureSpec::lipschitz_line({0.1, 0.4, 0.7}, 0.5);
  ObservationLog log(spec.support, 3);
  // N = (20, 3, 10), means (0.55, 0.667, 0.5).
  for (int k = 0; k < 20; ++k) log.record_level(0, k % 20 < 11);
  for (int k = 0; k < 3; ++k) log.record_level(1, k < 2);
  for (int k = 0; k < 10; ++k) log.record_level(2, k < 5);
  OssbState st{spec.lipschitz, spec.distance, 0.0, 0.0, 0, Phase::init};
  const long t = 34;
  const auto lp = lipschitz_lp(log.empirical(), spec.lipschitz, spec.distance);
  const double lt = std::log(static_cast<double>(t));
  // Script the rule: arm 1 is the empirical best; arms 0 and 2 are tracked.
  bool satisfied = true;
  int expect = 1;
  double best_ratio = kInf;
  for (int x : {0, 2}) {
    if (log.count(x) < lp.rates[x] * lt) satisfied = false;
    if (lp.rates[x] > 0 && log.count(x) / lp.rates[x] < best_ratio) best_ratio = log.count(x) / lp.rates[x], expect = x;
  }
  REQUIRE_FALSE(satisfied);
  CHECK(ossb_lipschitz_step(log, t, st) == expect);
  CHECK(st.phase == Phase::explore_rate);
  CHECK(st.s == 1);

  // With every arm far beyond its rate the tracker exploits.
  ObservationLog many(spec.support, 3);
  for (int k = 0; k < 4000; ++k) {
    many.record_level(0, k % 20 < 11);
    many.record_level(1, k % 3 < 2);
    many.record_level(2, k % 2 == 0);
  }
  OssbState st2{spec.lipschitz, spec.distance, 0.0, 0.0, 0, Phase::init};
  CHECK(ossb_lipschitz_step(many, 12001, st2) == 1);
  CHECK(st2.phase == Phase::exploit);

  // A top-reward best arm makes C vanish.
  ObservationLog top(spec.support, 3);
  top.record_level(0, 0);
  top.record_level(1, 1);
  top.record_level(2, 0);
  OssbState st3{spec.lipschitz, spec.distance, 0.0, 0.0, 0, Phase::init};
  CHECK(ossb_lipschitz_step(top, 4, st3) == 1);
  CHECK(st3.phase == Phase::exploit);
}

TEST_CASE("short DUSA run keeps its invariants") {
  const auto spec = StructureSpec::lipschitz_line({0.1, 0.45, 0.8}, 0.5);
  const auto truth = RewardMatrix::bernoulli({0.6, 0.77, 0.55});
  const long T = 400;
  auto run = [&](std::vector<int>& pulls) {
    DusaState st = dusa_init(spec, {1e-3, 50.0, false});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const ConeDescription cone = dual_cone(spec);
    for (long t = 1; t <= T; ++t) {
      const auto mu_before = st.mu;
      const RateVector eta_before = st.eta_ref;
      const long s_before = st.s;
      const auto d = dusa_step(st, t);
      REQUIRE(d.arm >= 0);
      REQUIRE(d.arm < 3);
      CHECK_FALSE(d.solver_failure);
      if (d.phase == Phase::exploit) {
        CHECK(same_duals(st.mu, mu_before));
        CHECK(st.eta_ref == eta_before);
        CHECK(st.s == s_before);
      } else if (d.phase != Phase::init) {
        CHECK(st.s == s_before + 1);
        for (const auto& m : st.mu) CHECK(dual_feasible(cone, m, 1e-7));
      }
      if (d.phase == Phase::explore_rate) {
        const double top = d.eta.maxCoeff();
        CHECK(static_cast<double>(st.log.count(d.arm)) <= 1.001 * top * std::log(static_cast<double>(T)));
      }
      pulls.push_back(d.arm);
      st.log.record_level(d.arm, U(rng) < mean_reward(truth, d.arm) ? 1 : 0);
    }
    return st.s;
  };
  std::vector<int> a, b;
  const long sa = run(a);
  const long sb = run(b);
  CHECK(a == b);
  CHECK(sa == sb);
  CHECK(sa > 0);
  CHECK(sa < T);
}
