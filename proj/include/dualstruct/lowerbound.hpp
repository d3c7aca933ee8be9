#pragma once

#include <vector>

#include "dualstruct/conic.hpp"
#include "dualstruct/infodual.hpp"
#include "dualstruct/structures.hpp"

namespace dualstruct {

struct LowerBoundResult {
  double value = 0.0;
  RateVector rates;              // zero on optimal arms
  std::vector<DualVars> duals;   // one per arm; zeros unless the arm is deceitful
  SolveStatus status = SolveStatus::optimal;
  ArmClasses classes;
  int iterations = 0;
  bool ok() const { return status == SolveStatus::optimal; }
};

struct DualProgramOptions {
  // Keep lambda as variables with lambda >= floor(aux). Otherwise lambda is the floor itself,
  // which loses nothing for the plain bound: raising lambda only lowers the dual function.
  bool explicit_lambda = false;
  double rate_floor = 0.0;   // eta(x) >= rate_floor on suboptimal arms
  double slack_floor = 0.0;  // eta(x) - lambda - beta - alpha r 1[x = x'] >= slack_floor
};

// The conic lower-bound program with its variable map. Exposed so the deep update can add
// its own objective and rows.
struct DualProgram {
  struct Block {
    int arm = -1;
    int alpha = -1;
    int beta = -1;
    int aux = -1;     // first aux variable
    int lambda = -1;  // first explicit lambda variable, or -1
    std::vector<AffineExpr> lambda_expr;  // per base index r + levels * x
  };
  ConicProgram prog;
  std::vector<int> eta;  // program index per arm, -1 on optimal arms
  std::vector<Block> blocks;
  ArmClasses classes;
  Eigen::VectorXd gaps;
  int aux_count = 0;

  RateVector rates(const Eigen::VectorXd& x) const;
  std::vector<DualVars> duals(const Eigen::VectorXd& x, int levels) const;
};

DualProgram build_dual_program(const StructureSpec& spec, const RewardMatrix& P, const ArmClasses& classes,
                               const DualProgramOptions& opts = {});

// Solver tolerance that makes the returned point eps-suboptimal for moderate bound values.
double tolerance_for(double eps);

LowerBoundResult lower_bound_dual(const StructureSpec& spec, const RewardMatrix& P, double eps);

// K_inf(p, target): smallest I(p, q) over distributions q on the support with mean >= target.
double kinf(const RewardSupport& support, const Eigen::VectorXd& p, double target);

// Unstructured model: sum over deceitful arms of gap / K_inf.
double lower_bound_separable(const RewardMatrix& P);

RewardMatrix worst_deceitful_lipschitz(const RewardMatrix& P, int xp, double L, const Eigen::MatrixXd& d);

struct LipschitzLp {
  double value = 0.0;
  RateVector rates;
};
LipschitzLp lipschitz_lp(const RewardMatrix& P, double L, const Eigen::MatrixXd& d);
inline double lower_bound_lipschitz_lp(const RewardMatrix& P, double L, const Eigen::MatrixXd& d) {
  return lipschitz_lp(P, L, d).value;
}

// e (delta ceil(delta log t) 2e / D)^D exp(-delta) with D = arms (levels - 1).
double concentration_bound(double delta, double t, int arms, int levels);

}  // namespace dualstruct
