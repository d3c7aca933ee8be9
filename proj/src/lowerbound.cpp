#include "dualstruct/lowerbound.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualstruct {

namespace {

AffineExpr shifted(const Terms& terms, int offset) {
  AffineExpr e;
  for (const auto& [i, a] : terms) e.terms.emplace_back(i + offset, a);
  return e;
}

void add_scaled(Terms& out, const AffineExpr& e, double s) {
  for (const auto& [i, a] : e.terms) out.emplace_back(i, s * a);
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

RateVector DualProgram::rates(const Eigen::VectorXd& x) const {
  RateVector out = RateVector::Zero(static_cast<Eigen::Index>(eta.size()));
  for (std::size_t a = 0; a < eta.size(); ++a)
    if (eta[a] >= 0) out[a] = std::max(0.0, x[eta[a]]);
  return out;
}

std::vector<DualVars> DualProgram::duals(const Eigen::VectorXd& x, int levels) const {
  const int arms = static_cast<int>(eta.size());
  std::vector<DualVars> out(arms, DualVars::zeros(levels, arms, aux_count));
  for (const auto& b : blocks) {
    DualVars& mu = out[b.arm];
    mu.alpha = std::max(0.0, x[b.alpha]);
    mu.beta = x[b.beta];
    for (int k = 0; k < aux_count; ++k) mu.aux[k] = x[b.aux + k];
    for (int x_ = 0; x_ < arms; ++x_)
      for (int r = 0; r < levels; ++r) mu.lambda(r, x_) = b.lambda_expr[r + levels * x_].eval(x);
  }
  return out;
}

DualProgram build_dual_program(const StructureSpec& spec, const RewardMatrix& P, const ArmClasses& classes,
                               const DualProgramOptions& opts) {
  const int X = P.arms();
  const int R = P.levels();
  const auto& sup = P.support();
  const ConeDescription dual = dual_cone(spec);
  const double best = best_arm_and_value(P).value;

  DualProgram dp;
  dp.classes = classes;
  dp.aux_count = dual.aux_count;
  dp.gaps = Eigen::VectorXd::Zero(X);
  dp.eta.assign(X, -1);
  ConicProgram& prog = dp.prog;

  std::vector<int> sub;
  for (int x = 0; x < X; ++x)
    if (!contains(classes.optimal, x)) sub.push_back(x);
  const double n_sub = static_cast<double>(sub.size());

  for (int x : sub) {
    const int i = prog.add_variables(1);
    dp.eta[x] = i;
    dp.gaps[x] = best - mean_reward(P, x);
    prog.objective[i] = dp.gaps[x];
    prog.constraints.add_ge({{i, 1.0}}, opts.rate_floor);
    prog.linking.push_back(i);
  }

  for (int xp : classes.deceitful) {
    DualProgram::Block b;
    b.arm = xp;
    b.alpha = prog.add_variables(1);
    b.beta = prog.add_variables(1);
    b.aux = prog.add_variables(dual.aux_count);
    prog.constraints.add_ge({{b.alpha, 1.0}}, 0.0);
    prog.constraints.append(dual.aux_system.embedded(b.aux, prog.variable_count));
    b.lambda_expr.resize(dual.base_count());
    if (opts.explicit_lambda) {
      b.lambda = prog.add_variables(dual.base_count());
      for (int k = 0; k < dual.base_count(); ++k) {
        Terms row{{b.lambda + k, 1.0}};
        add_scaled(row, shifted(dual.lambda_floor[k], b.aux), -1.0);
        prog.constraints.add_ge(std::move(row), 0.0);
        b.lambda_expr[k] = AffineExpr::var(b.lambda + k);
      }
    } else {
      for (int k = 0; k < dual.base_count(); ++k) b.lambda_expr[k] = shifted(dual.lambda_floor[k], b.aux);
    }

    // -1 - sum P l - sum_{opt} lambda P + alpha Rew* + beta |sub| >= 0
    Terms lin{{b.alpha, best}, {b.beta, n_sub}};
    for (int o : classes.optimal)
      for (int r = 0; r < R; ++r)
        if (P(r, o) != 0.0) add_scaled(lin, b.lambda_expr[dual.base_index(r, o)], -P(r, o));

    for (int x : sub) {
      for (int r = 0; r < R; ++r) {
        // v = eta(x) - lambda(r, x) - beta - alpha r 1[x = x']
        AffineExpr v = AffineExpr::var(dp.eta[x]);
        add_scaled(v.terms, b.lambda_expr[dual.base_index(r, x)], -1.0);
        v.terms.emplace_back(b.beta, -1.0);
        if (x == xp && sup[r] != 0.0) v.terms.emplace_back(b.alpha, -sup[r]);
        if (P(r, x) > 0.0) {
          const int l = prog.add_variables(1);
          lin.emplace_back(l, -P(r, x));
          prog.triples.push_back({AffineExpr::var(l, -1.0), v, AffineExpr::var(dp.eta[x])});
        }
        if (P(r, x) == 0.0 || opts.slack_floor > 0.0) prog.constraints.add_ge(v.terms, opts.slack_floor);
      }
    }
    prog.constraints.add_ge(std::move(lin), 1.0);
    dp.blocks.push_back(std::move(b));
  }
  prog.constraints.variable_count = prog.variable_count;
  return dp;
}

double tolerance_for(double eps) { return std::clamp(eps * 1e-2, 1e-10, 1e-2); }

LowerBoundResult lower_bound_dual(const StructureSpec& spec, const RewardMatrix& P, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("accuracy must be positive");
  LowerBoundResult res;
  res.classes = classify_arms(spec, P);
  res.rates = RateVector::Zero(P.arms());
  res.duals.assign(P.arms(), DualVars::zeros(P.levels(), P.arms(), dual_cone(spec).aux_count));
  if (res.classes.deceitful.empty()) return res;

  const DualProgram dp = build_dual_program(spec, P, res.classes);
  const Solution s = solve(dp.prog, tolerance_for(eps));
  res.status = s.status;
  res.iterations = s.iterations;
  if (!s.ok()) {
    res.value = kInf;
    return res;
  }
  res.rates = dp.rates(s.x);
  res.duals = dp.duals(s.x, P.levels());
  res.value = std::max(0.0, dp.gaps.dot(res.rates));
  return res;
}

double kinf(const RewardSupport& support, const Eigen::VectorXd& p, double target) {
  const int K = static_cast<int>(support.size());
  double mean = 0.0;
  for (int r = 0; r < K; ++r) mean += support[r] * p[r];
  if (mean >= target) return 0.0;
  const double top = support.max();
  if (target > top) return kInf;
  if (target == top) return p[K - 1] > 0.0 ? -std::log(p[K - 1]) : kInf;
  if (K == 2 && support[0] == 0.0 && top == 1.0) return bernoulli_kl(p[1], target);

  // max over lam in [0, 1/(top - target)] of E_p log(1 - lam (r - target)), concave in lam.
  auto g = [&](double lam) {
    double s = 0.0;
    for (int r = 0; r < K; ++r) {
      if (p[r] == 0.0) continue;
      const double arg = 1.0 - lam * (support[r] - target);
      if (arg <= 0.0) return -kInf;
      s += p[r] * std::log(arg);
    }
    return s;
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = 1.0 / (top - target);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = g(c), fd = g(d);
  for (int it = 0; it < 300 && b - a > 1e-15 * std::max(1.0, b); ++it) {
    if (fc >= fd) {
      b = d, d = c, fd = fc;
      c = b - phi * (b - a);
      fc = g(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + phi * (b - a);
      fd = g(d);
    }
  }
  double best = std::max({0.0, g(a), g(b), g(0.5 * (a + b))});
  best = std::max(best, g(1.0 / (top - target)));
  return best;
}

double lower_bound_separable(const RewardMatrix& P) {
  const auto opt = optimal_arms(P);
  const double best = best_arm_and_value(P).value;
  if (best >= P.support().max()) return 0.0;
  double c = 0.0;
  for (int x = 0; x < P.arms(); ++x) {
    if (contains(opt, x)) continue;
    c += (best - mean_reward(P, x)) / kinf(P.support(), P.probs().col(x), best);
  }
  return c;
}

RewardMatrix worst_deceitful_lipschitz(const RewardMatrix& P, int xp, double L, const Eigen::MatrixXd& d) {
  if (P.levels() != 2) throw std::invalid_argument("worst deceitful model needs Bernoulli rewards");
  const double best = best_arm_and_value(P).value;
  RewardMatrix Q = P;
  for (int x = 0; x < P.arms(); ++x) {
    const double q = std::max(P(1, x), best - L * d(x, xp));
    Q(1, x) = q;
    Q(0, x) = 1.0 - q;
  }
  return Q;
}

LipschitzLp lipschitz_lp(const RewardMatrix& P, double L, const Eigen::MatrixXd& d) {
  LipschitzLp out;
  out.rates = RateVector::Zero(P.arms());
  const double best = best_arm_and_value(P).value;
  if (best >= 1.0) return out;
  const auto opt = optimal_arms(P);
  std::vector<int> sub;
  for (int x = 0; x < P.arms(); ++x)
    if (!contains(opt, x)) sub.push_back(x);
  if (sub.empty()) return out;

  ConicProgram prog(static_cast<int>(sub.size()));
  for (std::size_t k = 0; k < sub.size(); ++k) {
    prog.objective[k] = best - mean_reward(P, sub[k]);
    prog.constraints.add_ge({{static_cast<int>(k), 1.0}}, 0.0);
  }
  for (int xp : sub) {
    const RewardMatrix Q = worst_deceitful_lipschitz(P, xp, L, d);
    Terms row;
    for (std::size_t k = 0; k < sub.size(); ++k) {
      const double info = bernoulli_kl(P(1, sub[k]), Q(1, sub[k]));
      if (info > 0.0) row.emplace_back(static_cast<int>(k), info);
    }
    prog.constraints.add_ge(std::move(row), 1.0);
  }
  const Solution s = lp_solve(prog);
  if (!s.ok()) throw std::runtime_error("Lipschitz LP failed: " + to_string(s.status));
  for (std::size_t k = 0; k < sub.size(); ++k) out.rates[sub[k]] = s.x[k];
  out.value = s.objective;
  return out;
}

double concentration_bound(double delta, double t, int arms, int levels) {
  const int D = arms * (levels - 1);
  if (D < 1) throw std::invalid_argument("need at least one arm and two reward levels");
  if (t < 1.0) throw std::invalid_argument("round index must be at least 1");
  if (delta < D + 1) throw std::invalid_argument("delta must be at least arms * (levels - 1) + 1");
  const double e = std::exp(1.0);
  const double slices = std::ceil(std::log(t) * delta + 1.0);
  return e * std::pow(delta * slices * 2.0 * e / D, D) * std::exp(-delta);
}

}  // namespace dualstruct
