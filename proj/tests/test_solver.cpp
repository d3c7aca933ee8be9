#include <doctest.h>

#include <cmath>
#include <random>

#include "dualstruct/conic.hpp"
#include "oracles.hpp"

using namespace dualstruct;

TEST_CASE("trivial bound") {
  ConicProgram p(1);
  p.objective[0] = 1.0;
  p.constraints.add_ge({{0, 1.0}}, 1.0);
  const auto s = solve(p, 1e-9);
  REQUIRE(s.ok());
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  const auto l = lp_solve(p);
  REQUIRE(l.ok());
  CHECK(l.x[0] == doctest::Approx(1.0));
}

TEST_CASE("exponential cone returns e") {
  ConicProgram p(1);
  p.objective[0] = 1.0;
  p.triples.push_back({AffineExpr::constant_value(1.0), AffineExpr::var(0), AffineExpr::constant_value(1.0)});
  const auto s = solve(p, 1e-10);
  REQUIRE(s.ok());
  CHECK(std::abs(s.x[0] - std::exp(1.0)) < 1e-7);
  CHECK(max_violation(p, s.x) <= 1e-9);
}

TEST_CASE("exp cone epigraph of a KL term") {
  // min sum_r p_r log(p_r/q_r) over the simplex with q_1 >= 0.8: optimum I_B(0.5, 0.8).
  ConicProgram p(4);  // q0 q1 t0 t1
  p.objective << 0, 0, 1, 1;
  p.constraints.add_eq({{0, 1.0}, {1, 1.0}}, 1.0);
  p.constraints.add_ge({{1, 1.0}}, 0.8);
  for (int r = 0; r < 2; ++r)
    p.triples.push_back({AffineExpr::var(2 + r, -1.0), AffineExpr::var(r), AffineExpr::constant_value(0.5)});
  const auto s = solve(p, 1e-10);
  REQUIRE(s.ok());
  const double expect = 0.5 * std::log(0.5 / 0.8) + 0.5 * std::log(0.5 / 0.2);
  CHECK(std::abs(s.objective - expect) < 1e-8);
}

TEST_CASE("infeasible and unbounded programs") {
  ConicProgram p(1);
  p.objective[0] = 1.0;
  p.constraints.add_ge({{0, 1.0}}, 1.0);
  p.constraints.add_ge({{0, -1.0}}, 0.0);
  CHECK(lp_solve(p).status == SolveStatus::infeasible);
  CHECK(solve(p).status == SolveStatus::infeasible);

  ConicProgram q(1);
  q.objective[0] = -1.0;
  q.constraints.add_ge({{0, 1.0}}, 0.0);
  CHECK(lp_solve(q).status == SolveStatus::unbounded);
  CHECK(solve(q).status == SolveStatus::unbounded);
}

TEST_CASE("degenerate LP with redundant equalities") {
  ConicProgram p(3);
  p.objective << 1, 2, 3;
  for (int k = 0; k < 3; ++k) p.constraints.add_ge({{k, 1.0}}, 0.0);
  p.constraints.add_eq({{0, 1.0}, {1, 1.0}, {2, 1.0}}, 1.0);
  p.constraints.add_eq({{0, 2.0}, {1, 2.0}, {2, 2.0}}, 2.0);
  p.constraints.add_ge({{0, -1.0}}, -0.25);
  const auto l = lp_solve(p);
  REQUIRE(l.ok());
  CHECK(l.objective == doctest::Approx(0.25 + 2 * 0.75));
  const auto s = solve(p, 1e-9);
  REQUIRE(s.ok());
  CHECK(std::abs(s.objective - l.objective) < 1e-6);
}

namespace {

struct RandomLp {
  ConicProgram prog;
  Eigen::MatrixXd Aeq, G;
  Eigen::VectorXd beq, h;
};

RandomLp random_lp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1);
  const int n = 2 + static_cast<int>(rng() % 3);
  const int m = 1 + static_cast<int>(rng() % 5);
  const bool with_eq = rng() % 3 == 0;
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = 2.0 + 2.0 * U(rng);
  RandomLp lp{ConicProgram(n), Eigen::MatrixXd(with_eq ? 1 : 0, n), Eigen::MatrixXd(m + 2 * n, n),
              Eigen::VectorXd(with_eq ? 1 : 0), Eigen::VectorXd(m + 2 * n)};
  for (int i = 0; i < n; ++i) lp.prog.objective[i] = U(rng);
  int row = 0;
  auto add_ge = [&](const Eigen::VectorXd& a, double b) {
    Terms t;
    for (int i = 0; i < n; ++i)
      if (a[i] != 0.0) t.emplace_back(i, a[i]);
    lp.prog.constraints.add_ge(t, b);
    lp.G.row(row) = a.transpose();
    lp.h[row++] = b;
  };
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = 1.0;
    add_ge(e, 0.0);
    add_ge(-e, -5.0);
  }
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = U(rng);
    add_ge(a, a.dot(x0) - std::abs(U(rng)));
  }
  if (with_eq) {
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = U(rng);
    Terms t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, a[i]);
    lp.prog.constraints.add_eq(t, a.dot(x0));
    lp.Aeq.row(0) = a.transpose();
    lp.beq[0] = a.dot(x0);
  }
  return lp;
}

}  // namespace

TEST_CASE("random LPs agree across barrier, simplex and vertex enumeration") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 100; ++k) {
    auto lp = random_lp(rng);
    const double truth = oracle::vertex_enumeration(lp.prog.objective, lp.Aeq, lp.beq, lp.G, lp.h);
    const auto a = solve(lp.prog, 1e-10);
    const auto b = lp_solve(lp.prog);
    INFO("lp ", k, " status ", to_string(a.status), " it ", a.iterations, " gap ", a.barrier);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(std::abs(a.objective - truth) < 1e-6);
    CHECK(std::abs(b.objective - truth) < 1e-6);
    CHECK(max_violation(lp.prog, a.x) <= 1e-8);
    CHECK(max_violation(lp.prog, b.x) <= 1e-8);
  }
}

TEST_CASE("objective scaling keeps the solution feasible and scales the value") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) {
    auto lp = random_lp(rng);
    const auto a = solve(lp.prog, 1e-9);
    lp.prog.objective *= 10.0;
    const auto b = solve(lp.prog, 1e-9);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(max_violation(lp.prog, b.x) <= 1e-8);
    CHECK(std::abs(b.objective - 10.0 * a.objective) < 1e-6 * (1 + std::abs(b.objective)));
  }
}

TEST_CASE("linking variables give the same answer as a single block") {
  // Two independent KL blocks tied by a shared weight.
  auto build = [](bool hint) {
    ConicProgram p(5);  // w, q_a, t_a, q_b, t_b
    p.objective << 1, 0, 0, 0, 0;
    p.constraints.add_ge({{0, 1.0}}, 0.0);
    const double pa = 0.3, pb = 0.6;
    p.triples.push_back({AffineExpr::var(2, -1.0), AffineExpr::var(1), AffineExpr::constant_value(pa)});
    p.triples.push_back({AffineExpr::var(4, -1.0), AffineExpr::var(3), AffineExpr::constant_value(pb)});
    p.constraints.add_ge({{1, -1.0}}, -0.5);
    p.constraints.add_ge({{3, -1.0}}, -0.4);
    p.constraints.add_ge({{0, 1.0}, {2, -1.0}}, 0.2);
    p.constraints.add_ge({{0, 1.0}, {4, -1.0}}, 0.1);
    if (hint) p.linking = {0};
    return p;
  };
  const auto a = solve(build(false), 1e-10);
  const auto b = solve(build(true), 1e-10);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(std::abs(a.objective - b.objective) < 1e-8);
  CHECK(a.objective == doctest::Approx(std::max(0.2 + 0.3 * std::log(0.3 / 0.5), 0.1 + 0.6 * std::log(0.6 / 0.4))));
}
