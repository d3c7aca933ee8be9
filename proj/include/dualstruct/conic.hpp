#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualstruct/linear_system.hpp"

namespace dualstruct {

struct AffineExpr {
  Terms terms;
  double constant = 0.0;

  static AffineExpr var(int i, double coef = 1.0) { return {{{i, coef}}, 0.0}; }
  static AffineExpr constant_value(double c) { return {{}, c}; }
  double eval(const Eigen::VectorXd& x) const {
    double s = constant;
    for (const auto& [i, a] : terms) s += a * x[i];
    return s;
  }
};

// (u, v, w) in K_exp: w > 0 and w * exp(u / w) <= v, or the closure u <= 0, v >= 0, w = 0.
struct ExpTriple {
  AffineExpr u, v, w;
};

// minimize c.x + sum_i quad_i * x_i^2 subject to linear rows and exponential-cone triples.
struct ConicProgram {
  int variable_count = 0;
  Eigen::VectorXd objective;
  Eigen::VectorXd quad;  // empty, or nonnegative entries per variable
  LinearSystem constraints;
  std::vector<ExpTriple> triples;

  // Variables that couple otherwise independent groups. The solver eliminates every
  // group separately and only factors a dense system over these.
  std::vector<int> linking;
  // Optional strictly feasible point; phase one is skipped when it checks out.
  std::optional<Eigen::VectorXd> start;
  // Every variable is confined to [-box, box] inside the solver.
  double box = 1e8;

  explicit ConicProgram(int n = 0)
      : variable_count(n), objective(Eigen::VectorXd::Zero(n)) {
    constraints.variable_count = n;
  }
  int add_variables(int k);
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };
std::string to_string(SolveStatus s);

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double barrier = 0.0;  // duality-gap bound nu / t at exit
  int iterations = 0;
  bool ok() const { return status == SolveStatus::optimal; }
};

struct SolverOptions {
  double mu = 16.0;           // barrier parameter growth per outer step
  int max_newton = 600;       // total Newton steps over both phases
  double center_tol = 1e-9;   // Newton decrement^2 / 2 stopping level
};

// Primal log-barrier path following with the exponential-cone barrier.
Solution solve(const ConicProgram& prog, double tol = 1e-8, const SolverOptions& opts = {});

// Dense two-phase simplex; the program must have no triples and no quadratic term.
Solution lp_solve(const ConicProgram& prog, double tol = 1e-9);

double objective_value(const ConicProgram& prog, const Eigen::VectorXd& x);

// Largest violation of any constraint of prog at x.
double max_violation(const ConicProgram& prog, const Eigen::VectorXd& x);

// Plain-text dump, one constraint per line.
void dump_program(const ConicProgram& prog, std::ostream& out);

}  // namespace dualstruct
