#include "dualstruct/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dualstruct/conic.hpp"

namespace dualstruct {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::init: return "init";
    case Phase::exploit: return "exploit";
    case Phase::explore_least: return "explore-least";
    case Phase::explore_rate: return "explore-rate";
    case Phase::explore_optimal: return "explore-optimal";
  }
  return "?";
}

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::vector<int> complement(const std::vector<int>& v, int n) {
  std::vector<int> out;
  for (int x = 0; x < n; ++x)
    if (!contains(v, x)) out.push_back(x);
  return out;
}

// The constraint max_rho Dual(eta, x', P; rho mu) >= 1 written with rho as a variable. The
// dual function is jointly concave in (eta, rho), so this is a convex feasible set.
struct ShallowProgram {
  ConicProgram prog;
  std::vector<int> eta;  // per arm, -1 on optimal arms
  Eigen::VectorXd gaps;
};

ShallowProgram build_shallow(const RewardMatrix& P, const std::vector<int>& optimal, const std::vector<int>& active,
                             const std::vector<DualVars>& mu) {
  const int X = P.arms();
  const int R = P.levels();
  const auto& sup = P.support();
  const double best = best_arm_and_value(P).value;
  const auto sub = complement(optimal, X);
  ShallowProgram sp;
  sp.eta.assign(X, -1);
  sp.gaps = Eigen::VectorXd::Zero(X);
  ConicProgram& prog = sp.prog;
  for (int x : sub) {
    const int i = prog.add_variables(1);
    sp.eta[x] = i;
    sp.gaps[x] = best - mean_reward(P, x);
    prog.objective[i] = sp.gaps[x];
    prog.constraints.add_ge({{i, 1.0}}, 0.0);
    prog.linking.push_back(i);
  }
  for (int xp : active) {
    const DualVars& m = mu[xp];
    const int rho = prog.add_variables(1);
    prog.constraints.add_ge({{rho, 1.0}}, 0.0);
    double lin = m.alpha * best + m.beta * static_cast<double>(sub.size());
    for (int o : optimal)
      for (int r = 0; r < R; ++r) lin -= m.lambda(r, o) * P(r, o);
    Terms row{{rho, lin}};
    for (int x : sub) {
      for (int r = 0; r < R; ++r) {
        const double c = m.lambda(r, x) + m.beta + (x == xp ? m.alpha * sup[r] : 0.0);
        if (c == 0.0) continue;
        AffineExpr v;
        v.terms = {{sp.eta[x], 1.0}, {rho, -c}};
        if (P(r, x) > 0.0) {
          const int l = prog.add_variables(1);
          row.emplace_back(l, -P(r, x));
          prog.triples.push_back({AffineExpr::var(l, -1.0), v, AffineExpr::var(sp.eta[x])});
        } else {
          prog.constraints.add_ge(v.terms, 0.0);
        }
      }
    }
    prog.constraints.add_ge(std::move(row), 1.0);
  }
  prog.constraints.variable_count = prog.variable_count;
  return sp;
}

// Strictly feasible point: eta = M on suboptimal arms and each rho a fraction of its
// maximizer at eta = 1, scaled by M (the dual test is positively homogeneous).
Eigen::VectorXd shallow_start(const ShallowProgram& sp, const RewardMatrix& P, const std::vector<int>& active,
                              const std::vector<DualVars>& mu, const std::vector<double>& rho_unit,
                              const std::vector<double>& value_unit) {
  const int X = P.arms();
  const int R = P.levels();
  const auto& sup = P.support();
  double worst = kInf;
  for (double v : value_unit) worst = std::min(worst, v);
  const double M = 3.0 / worst;
  int n_sub = 0;
  for (int x = 0; x < X; ++x) n_sub += sp.eta[x] >= 0;
  const double delta = 1.0 / std::max(1, n_sub);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(sp.prog.variable_count);
  for (int x = 0; x < X; ++x)
    if (sp.eta[x] >= 0) z[sp.eta[x]] = M;
  // Variables were created in the order rho, then one l per (x, r) triple.
  int next = n_sub;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const DualVars& m = mu[active[k]];
    const double rho = M * rho_unit[k];
    z[next++] = rho;
    for (int x = 0; x < X; ++x) {
      if (sp.eta[x] < 0) continue;
      for (int r = 0; r < R; ++r) {
        const double c = m.lambda(r, x) + m.beta + (x == active[k] ? m.alpha * sup[r] : 0.0);
        if (c == 0.0 || P(r, x) <= 0.0) continue;
        z[next++] = -M * std::log((M - rho * c) / M) + delta;
      }
    }
  }
  return z;
}

}  // namespace

ShallowResult shallow_update(const StructureSpec& spec, const RewardMatrix& P, const RateVector& eta_ref,
                             const std::vector<DualVars>& mu, double eps, bool strict) {
  const int X = P.arms();
  ShallowResult res;
  res.eta = RateVector::Zero(X);
  const auto cls = classify_arms(spec, P);
  if (cls.deceitful.empty()) return res;

  const RateVector ones = RateVector::Ones(X);
  std::vector<int> active;
  std::vector<double> rho_unit, value_unit;
  for (int xp : cls.deceitful) {
    const DualTest dt = dual_test_argmax(ones, xp, P, mu[xp]);
    if (!(dt.value > 1e-12)) {
      res.infeasible = true;
      res.status = SolveStatus::infeasible;
      res.eta = RateVector::Constant(X, kInf);
      res.value = kInf;
      return res;
    }
    if (std::isinf(dt.value)) continue;  // met by any positive rates
    const double rho = 0.9 * dt.rho;
    active.push_back(xp);
    rho_unit.push_back(rho);
    value_unit.push_back(dual_value(ones, xp, P, mu[xp].scaled(rho)));
  }
  if (active.empty()) return res;

  ShallowProgram sp = build_shallow(P, cls.optimal, active, mu);
  sp.prog.start = shallow_start(sp, P, active, mu, rho_unit, value_unit);
  const Solution s = solve(sp.prog, tolerance_for(eps));
  res.status = s.status;
  if (!s.ok()) return res;
  for (int x = 0; x < X; ++x)
    if (sp.eta[x] >= 0) res.eta[x] = std::max(0.0, s.x[sp.eta[x]]);
  res.value = sp.gaps.dot(res.eta);
  if (!strict) return res;

  // Closest rates to the reference among the 2 eps-suboptimal ones.
  ShallowProgram proj = build_shallow(P, cls.optimal, active, mu);
  Terms budget;
  proj.prog.quad = Eigen::VectorXd::Zero(proj.prog.variable_count);
  for (int x = 0; x < X; ++x) {
    const int i = proj.eta[x];
    if (i < 0) continue;
    proj.prog.objective[i] = -2.0 * eta_ref[x];
    proj.prog.quad[i] = 1.0;
    budget.emplace_back(i, -proj.gaps[x]);
  }
  proj.prog.constraints.add_ge(std::move(budget), -(res.value + 2.0 * eps));
  proj.prog.start = s.x;
  const Solution q = solve(proj.prog, tolerance_for(eps));
  res.status = q.status;
  if (!q.ok()) return res;
  for (int x = 0; x < X; ++x)
    if (proj.eta[x] >= 0) res.eta[x] = std::max(0.0, q.x[proj.eta[x]]);
  res.value = proj.gaps.dot(res.eta);
  return res;
}

DeepResult deep_update(const StructureSpec& spec, const RewardMatrix& P, double eps, bool strict) {
  const LowerBoundResult lb = lower_bound_dual(spec, P, eps);
  DeepResult res;
  res.status = lb.status;
  res.eta = lb.rates;
  res.mu = lb.duals;
  res.value = lb.value;
  if (!lb.ok() || !strict || lb.classes.deceitful.empty()) return res;

  // Minimum-norm eps-suboptimal point with rates and domain slacks kept off zero.
  double gap_sum = 0.0;
  for (int x = 0; x < P.arms(); ++x)
    if (!contains(lb.classes.optimal, x)) gap_sum += gap(P, x);
  DualProgramOptions opts;
  opts.explicit_lambda = true;
  opts.rate_floor = eps / (2.0 * gap_sum);
  opts.slack_floor = opts.rate_floor;
  DualProgram dp = build_dual_program(spec, P, lb.classes, opts);
  ConicProgram& prog = dp.prog;
  prog.quad = Eigen::VectorXd::Zero(prog.variable_count);
  Terms budget;
  for (int x = 0; x < P.arms(); ++x) {
    if (dp.eta[x] < 0) continue;
    prog.quad[dp.eta[x]] = 1.0;
    budget.emplace_back(dp.eta[x], -dp.gaps[x]);
  }
  prog.constraints.add_ge(std::move(budget), -(lb.value + eps));
  for (const auto& b : dp.blocks) {
    prog.quad[b.alpha] = prog.quad[b.beta] = 1.0;
    for (int k = 0; k < dp.aux_count; ++k) prog.quad[b.aux + k] = 1.0;
    for (std::size_t k = 0; k < b.lambda_expr.size(); ++k) prog.quad[b.lambda + static_cast<int>(k)] = 1.0;
  }
  const Solution s = solve(prog, tolerance_for(eps));
  res.status = s.status;
  if (!s.ok()) return res;
  res.eta = dp.rates(s.x);
  res.mu = dp.duals(s.x, P.levels());
  res.value = dp.gaps.dot(res.eta);
  return res;
}

DusaState dusa_init(const StructureSpec& spec, const DusaConfig& config) {
  const int X = spec.arms;
  if (!(config.eps > 0.0) || config.eps >= 1.0 / X)
    throw std::invalid_argument("accuracy must lie in (0, 1/arms)");
  if (!(config.T0 > 0.0)) throw std::invalid_argument("test schedule constant must be positive");
  DusaState st{spec, ObservationLog(spec.support, X), {}, RateVector::Ones(X), config};
  st.mu.assign(X, DualVars::zeros(spec.levels(), X, dual_cone(spec).aux_count));
  return st;
}

InfoTest sufficient_info_test(const DusaState& state, long t) {
  const RewardMatrix& P = state.log.empirical();
  const int X = P.arms();
  InfoTest out;
  out.values.assign(X, std::numeric_limits<double>::quiet_NaN());
  out.threshold = (1.0 - std::exp(-static_cast<double>(t) / state.config.T0)) * (1.0 + state.config.eps);
  const auto cls = classify_arms(state.spec, P);
  RateVector rate(X);
  const double lt = std::log(static_cast<double>(t));
  for (int x = 0; x < X; ++x) rate[x] = static_cast<double>(state.log.count(x)) / lt;
  for (int x : cls.deceitful) {
    out.values[x] = dual_test(rate, x, P, state.mu[x]);
    if (!(out.values[x] >= out.threshold)) out.pass = false;
  }
  return out;
}

int least_pulled(const ObservationLog& log) {
  const auto& n = log.counts();
  return static_cast<int>(std::min_element(n.begin(), n.end()) - n.begin());
}

int least_pulled_best(const ObservationLog& log) {
  int best = -1;
  for (int x : optimal_arms(log.empirical()))
    if (best < 0 || log.count(x) < log.count(best)) best = x;
  return best;
}

PolicyDecision dusa_step(DusaState& state, long t) {
  const int X = state.log.arms();
  PolicyDecision d;
  if (t <= X) {
    d.arm = static_cast<int>(t - 1);
    d.phase = state.phase = Phase::init;
    return d;
  }
  const RewardMatrix& P = state.log.empirical();
  const InfoTest test = sufficient_info_test(state, t);
  d.tests = test.values;
  d.threshold = test.threshold;
  if (test.pass) {
    d.arm = least_pulled_best(state.log);
    d.phase = state.phase = Phase::exploit;
    return d;
  }

  const double s_t = static_cast<double>(state.s);
  ++state.s;
  state.log.add_exploration();
  const auto& n = state.log.counts();
  const long min_n = *std::min_element(n.begin(), n.end());
  const double eps = state.config.eps;

  bool failed = false;
  if (static_cast<double>(min_n) <= eps * s_t / (1.0 + std::log1p(s_t))) {
    d.arm = least_pulled(state.log);
    d.phase = Phase::explore_least;
  } else {
    const ShallowResult sh = shallow_update(state.spec, P, state.eta_ref, state.mu, eps, state.config.strict);
    d.eta = sh.eta;
    if (!sh.infeasible && sh.status != SolveStatus::optimal) {
      failed = true;
    } else {
      const auto opt = optimal_arms(P);
      int bar = -1;
      double bar_ratio = kInf;
      for (int x = 0; x < X; ++x) {
        if (contains(opt, x) || !(sh.eta[x] > 0.0)) continue;
        const double ratio = static_cast<double>(n[x]) / sh.eta[x];
        if (bar < 0 || ratio < bar_ratio) bar = x, bar_ratio = ratio;
      }
      const int star = least_pulled_best(state.log);
      if (bar < 0 || n[star] <= n[bar]) {
        d.arm = star;
        d.phase = Phase::explore_optimal;
      } else {
        d.arm = bar;
        d.phase = Phase::explore_rate;
      }
    }
  }

  DeepResult deep = deep_update(state.spec, P, eps, state.config.strict);
  if (deep.ok()) {
    state.eta_ref = std::move(deep.eta);
    state.mu = std::move(deep.mu);
  } else {
    failed = true;
  }
  if (failed) {
    ++state.solver_failures;
    d.solver_failure = true;
    d.arm = least_pulled(state.log);
    d.phase = Phase::explore_least;
  }
  state.phase = d.phase;
  return d;
}

double klucb_index(double mean, long n, double level) {
  if (mean >= 1.0) return 1.0;
  double lo = std::max(0.0, mean), hi = 1.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (static_cast<double>(n) * bernoulli_kl(mean, mid) <= level) lo = mid;
    else hi = mid;
  }
  return lo;
}

int klucb_step(const ObservationLog& log, long t) {
  const int X = log.arms();
  if (t <= X) return static_cast<int>(t - 1);
  const double level = std::log(static_cast<double>(t));
  int best = 0;
  double best_u = -kInf;
  for (int x = 0; x < X; ++x) {
    const double u = klucb_index(mean_reward(log.empirical(), x), log.count(x), level);
    if (u > best_u) best = x, best_u = u;
  }
  return best;
}

int ucb1_step(const ObservationLog& log, long t) {
  const int X = log.arms();
  if (t <= X) return static_cast<int>(t - 1);
  const double lt = std::log(static_cast<double>(t));
  int best = 0;
  double best_u = -kInf;
  for (int x = 0; x < X; ++x) {
    const double u = mean_reward(log.empirical(), x) + std::sqrt(2.0 * lt / static_cast<double>(log.count(x)));
    if (u > best_u) best = x, best_u = u;
  }
  return best;
}

int ossb_lipschitz_step(const ObservationLog& log, long t, OssbState& st) {
  const int X = log.arms();
  if (t <= X) {
    st.phase = Phase::init;
    return static_cast<int>(t - 1);
  }
  const RewardMatrix& P = log.empirical();
  const auto opt = optimal_arms(P);
  const int star = least_pulled_best(log);
  st.phase = Phase::exploit;
  if (static_cast<int>(opt.size()) == X || best_arm_and_value(P).value >= 1.0) return star;
  LipschitzLp lp;
  try {
    lp = lipschitz_lp(P, st.L, st.distance);
  } catch (const std::runtime_error&) {
    return star;
  }
  const double lt = std::log(static_cast<double>(t));
  bool satisfied = true;
  for (int x = 0; x < X; ++x)
    if (!contains(opt, x) && static_cast<double>(log.count(x)) < (1.0 + st.gamma) * lp.rates[x] * lt) satisfied = false;
  if (satisfied) return star;

  ++st.s;
  const auto& n = log.counts();
  if (static_cast<double>(*std::min_element(n.begin(), n.end())) <= st.eps * static_cast<double>(st.s)) {
    st.phase = Phase::explore_least;
    return least_pulled(log);
  }
  int bar = -1;
  double bar_ratio = kInf;
  for (int x = 0; x < X; ++x) {
    if (contains(opt, x) || !(lp.rates[x] > 0.0)) continue;
    const double ratio = static_cast<double>(n[x]) / lp.rates[x];
    if (bar < 0 || ratio < bar_ratio) bar = x, bar_ratio = ratio;
  }
  st.phase = Phase::explore_rate;
  return bar;
}

namespace {

class DusaPolicy final : public Policy {
 public:
  DusaPolicy(const StructureSpec& spec, const DusaConfig& cfg) : st_(dusa_init(spec, cfg)) {}
  std::string name() const override { return st_.config.strict ? "dusa-strict" : "dusa"; }
  int select(long t) override { return dusa_step(st_, t).arm; }
  void observe(int arm, int level) override { st_.log.record_level(arm, level); }
  Phase phase() const override { return st_.phase; }
  long explorations() const override { return st_.s; }

 private:
  DusaState st_;
};

class LogPolicy : public Policy {
 public:
  LogPolicy(const StructureSpec& spec) : log_(spec.support, spec.arms) {}
  void observe(int arm, int level) override { log_.record_level(arm, level); }
  Phase phase() const override { return phase_; }

 protected:
  int finish(long t, int arm) {
    phase_ = t <= log_.arms() ? Phase::init : Phase::exploit;
    return arm;
  }
  ObservationLog log_;
  Phase phase_ = Phase::init;
};

class KlUcbPolicy final : public LogPolicy {
 public:
  using LogPolicy::LogPolicy;
  std::string name() const override { return "klucb"; }
  int select(long t) override { return finish(t, klucb_step(log_, t)); }
};

class Ucb1Policy final : public LogPolicy {
 public:
  using LogPolicy::LogPolicy;
  std::string name() const override { return "ucb1"; }
  int select(long t) override { return finish(t, ucb1_step(log_, t)); }
};

class OssbPolicy final : public LogPolicy {
 public:
  OssbPolicy(const StructureSpec& spec, double gamma, double eps) : LogPolicy(spec) {
    if (spec.kind != StructureKind::lipschitz || spec.levels() != 2)
      throw std::invalid_argument("the OSSB-style tracker needs a Bernoulli Lipschitz structure");
    st_.L = spec.lipschitz;
    st_.distance = spec.distance;
    st_.gamma = gamma;
    st_.eps = eps;
  }
  std::string name() const override { return "ossb-style"; }
  int select(long t) override {
    const int arm = ossb_lipschitz_step(log_, t, st_);
    phase_ = st_.phase;
    return arm;
  }
  long explorations() const override { return st_.s; }

 private:
  OssbState st_;
};

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const RewardMatrix& truth) : arm_(best_arm_and_value(truth).arm) {}
  std::string name() const override { return "oracle"; }
  int select(long) override { return arm_; }
  void observe(int, int) override {}

 private:
  int arm_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const StructureSpec& structure, const RewardMatrix& truth) {
  if (spec.kind == "dusa") return std::make_unique<DusaPolicy>(structure, spec.dusa);
  if (spec.kind == "klucb" || spec.kind == "kl-ucb") return std::make_unique<KlUcbPolicy>(structure);
  if (spec.kind == "ucb1") return std::make_unique<Ucb1Policy>(structure);
  if (spec.kind == "ossb" || spec.kind == "ossb-style") return std::make_unique<OssbPolicy>(structure, spec.ossb_gamma, spec.ossb_eps);
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>(truth);
  throw std::invalid_argument("unknown policy: " + spec.kind);
}

}  // namespace dualstruct
