#pragma once

#include "dualstruct/core.hpp"
#include "dualstruct/structures.hpp"

namespace dualstruct {

using RateVector = Eigen::VectorXd;

// mu = (alpha, beta, lambda) with lambda in the dual cone; aux holds the cone multipliers.
struct DualVars {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd lambda;  // levels x arms
  Eigen::VectorXd aux;

  static DualVars zeros(int levels, int arms, int aux_count = 0);
  DualVars scaled(double rho) const;
  bool is_zero() const;
};

// alpha >= 0 and (lambda, aux) satisfies the dual-cone system within tol.
bool dual_feasible(const ConeDescription& dual, const DualVars& mu, double tol = 1e-9);

// sum Mp log(Mp/M) - Mp + M with 0 log(0/a) = 0 and b log(b/0) = +inf.
double info_distance(const Eigen::VectorXd& Mp, const Eigen::VectorXd& M);
double bernoulli_kl(double p, double q);

struct ChainSides {
  double left;
  double right;
};
// N * I(Phat, P) and its expansion into a chain of Bernoulli divergences.
ChainSides kl_chain_decomposition(const Eigen::VectorXd& Phat, const Eigen::VectorXd& P, double N);

// Arms other than the (possibly tied) best arms of P.
std::vector<int> suboptimal_arms(const RewardMatrix& P);

// The concave dual function; -inf outside its domain.
double dual_value(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu);

struct DualTest {
  double value = 0.0;
  double rho = 0.0;
};
// max over rho >= 0 of dual_value(eta, xp, P, rho * mu).
DualTest dual_test_argmax(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu);
inline double dual_test(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu) {
  return dual_test_argmax(eta, xp, P, mu).value;
}

// min sum_{x suboptimal} eta(x) I(P(x), Q(x)) over models Q that agree with P on the
// best arms and make xp at least as good; +inf when xp is not deceitful.
double dist_oracle(const RateVector& eta, int xp, const RewardMatrix& P, const StructureSpec& spec,
                   double tol = 1e-9);

// Same objective over the half-space relaxation defined by mu (no structure constraints).
double halfspace_distance(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu,
                          double tol = 1e-9);

}  // namespace dualstruct
