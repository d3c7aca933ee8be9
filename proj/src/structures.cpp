#include "dualstruct/structures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dualstruct/conic.hpp"

namespace dualstruct {

std::string to_string(StructureKind k) {
  switch (k) {
    case StructureKind::separable: return "separable";
    case StructureKind::lipschitz: return "lipschitz";
    case StructureKind::linear: return "linear";
    case StructureKind::dispersion: return "dispersion";
  }
  return "unknown";
}

StructureKind structure_kind_from_string(const std::string& s) {
  if (s == "separable") return StructureKind::separable;
  if (s == "lipschitz") return StructureKind::lipschitz;
  if (s == "linear") return StructureKind::linear;
  if (s == "dispersion") return StructureKind::dispersion;
  throw std::invalid_argument("unknown structure kind '" + s + "'");
}

void StructureSpec::validate() const {
  if (arms < 1) throw std::invalid_argument("structure needs at least one arm");
  switch (kind) {
    case StructureKind::separable:
      if (!arm_constraints.empty() && static_cast<int>(arm_constraints.size()) != arms)
        throw std::invalid_argument("per-arm constraint list must have one entry per arm");
      for (const auto& list : arm_constraints)
        for (const auto& c : list)
          if (static_cast<int>(c.coeffs.size()) != levels())
            throw std::invalid_argument("arm constraint width must equal the support size");
      break;
    case StructureKind::lipschitz:
      if (lipschitz < 0) throw std::invalid_argument("Lipschitz constant must be nonnegative");
      if (distance.rows() != arms || distance.cols() != arms)
        throw std::invalid_argument("distance matrix must be arms x arms");
      for (int i = 0; i < arms; ++i) {
        if (distance(i, i) != 0.0) throw std::invalid_argument("distance diagonal must be zero");
        for (int j = 0; j < arms; ++j)
          if (distance(i, j) != distance(j, i) || distance(i, j) < 0)
            throw std::invalid_argument("distance must be symmetric and nonnegative");
      }
      break;
    case StructureKind::linear:
      if (features.rows() != arms || features.cols() < 1)
        throw std::invalid_argument("linear structure needs one feature row per arm");
      break;
    case StructureKind::dispersion:
      if (static_cast<int>(dispersion.size()) != arms) throw std::invalid_argument("one dispersion bound per arm");
      for (double g : dispersion)
        if (!(g > 0)) throw std::invalid_argument("dispersion bounds must be positive");
      break;
  }
}

StructureSpec StructureSpec::separable(RewardSupport support, int arms, std::vector<std::vector<ArmConstraint>> cons) {
  StructureSpec s;
  s.kind = StructureKind::separable;
  s.support = std::move(support);
  s.arms = arms;
  s.arm_constraints = std::move(cons);
  s.validate();
  return s;
}

StructureSpec StructureSpec::lipschitz_line(std::vector<double> positions, double L) {
  const int n = static_cast<int>(positions.size());
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = std::abs(positions[i] - positions[j]);
  StructureSpec s = lipschitz_metric(d, L);
  s.positions = std::move(positions);
  return s;
}

StructureSpec StructureSpec::lipschitz_metric(Eigen::MatrixXd d, double L) {
  StructureSpec s;
  s.kind = StructureKind::lipschitz;
  s.support = RewardSupport::bernoulli();
  s.arms = static_cast<int>(d.rows());
  s.distance = std::move(d);
  s.lipschitz = L;
  s.validate();
  return s;
}

StructureSpec StructureSpec::linear(RewardSupport support, Eigen::MatrixXd features) {
  StructureSpec s;
  s.kind = StructureKind::linear;
  s.support = std::move(support);
  s.arms = static_cast<int>(features.rows());
  s.features = std::move(features);
  s.validate();
  return s;
}

StructureSpec StructureSpec::dispersion_bound(RewardSupport support, std::vector<double> gamma) {
  StructureSpec s;
  s.kind = StructureKind::dispersion;
  s.support = std::move(support);
  s.arms = static_cast<int>(gamma.size());
  s.dispersion = std::move(gamma);
  s.validate();
  return s;
}

std::vector<std::pair<int, int>> lipschitz_pairs(const StructureSpec& spec) {
  const auto& d = spec.distance;
  const int n = spec.arms;
  const double tol = 1e-12 * std::max(1.0, d.size() > 0 ? d.maxCoeff() : 0.0);
  std::vector<std::pair<int, int>> out;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (x == y) continue;
      bool implied = false;
      for (int z = 0; z < n && !implied; ++z) {
        if (z == x || z == y) continue;
        // Both legs strictly shorter, so the chain of implications cannot loop.
        if (d(x, z) > tol && d(z, y) > tol && d(x, z) + d(z, y) <= d(x, y) + tol) implied = true;
      }
      if (!implied) out.emplace_back(x, y);
    }
  return out;
}

ConeDescription primal_cone(const StructureSpec& spec) {
  spec.validate();
  ConeDescription c;
  c.levels = spec.levels();
  c.arms = spec.arms;
  const int R = c.levels, X = c.arms;
  const auto& sup = spec.support;
  c.aux_count = spec.kind == StructureKind::linear ? 1 + static_cast<int>(spec.features.cols()) : 1;
  c.mass_index = c.base_count();
  auto& sys = c.system;
  sys.variable_count = c.variable_count();
  const int theta = c.mass_index;
  for (int i = 0; i < c.base_count(); ++i) sys.add_ge({{i, 1.0}}, 0.0);
  for (int x = 0; x < X; ++x) {
    Terms t;
    for (int r = 0; r < R; ++r) t.emplace_back(c.base_index(r, x), 1.0);
    t.emplace_back(theta, -1.0);
    sys.add_eq(std::move(t), 0.0);
  }
  switch (spec.kind) {
    case StructureKind::separable:
      if (!spec.arm_constraints.empty())
        for (int x = 0; x < X; ++x)
          for (const auto& ac : spec.arm_constraints[x]) {
            Terms t;
            for (int r = 0; r < R; ++r) t.emplace_back(c.base_index(r, x), ac.coeffs[r] - ac.rhs);
            sys.add_ge(std::move(t), 0.0);
          }
      break;
    case StructureKind::lipschitz:
      // mean(x) - mean(x') <= theta * L * d(x, x')
      for (const auto& [x, y] : lipschitz_pairs(spec)) {
        Terms t;
        for (int r = 0; r < R; ++r) {
          t.emplace_back(c.base_index(r, y), sup[r]);
          t.emplace_back(c.base_index(r, x), -sup[r]);
        }
        t.emplace_back(theta, spec.lipschitz * spec.distance(x, y));
        sys.add_ge(std::move(t), 0.0);
      }
      break;
    case StructureKind::linear:
      for (int x = 0; x < X; ++x) {
        Terms t;
        for (int r = 0; r < R; ++r) t.emplace_back(c.base_index(r, x), sup[r]);
        for (int j = 0; j < spec.features.cols(); ++j) t.emplace_back(theta + 1 + j, -spec.features(x, j));
        sys.add_eq(std::move(t), 0.0);
      }
      break;
    case StructureKind::dispersion:
      for (int x = 0; x < X; ++x) {
        Terms t;
        for (int r = 0; r < R; ++r)
          t.emplace_back(c.base_index(r, x), spec.dispersion[x] * sup[r] - sup[r] * sup[r]);
        sys.add_ge(std::move(t), 0.0);
      }
      break;
  }
  return c;
}

ConeDescription dual_cone(const StructureSpec& spec) {
  spec.validate();
  ConeDescription c;
  c.levels = spec.levels();
  c.arms = spec.arms;
  const int R = c.levels, X = c.arms;
  const auto& sup = spec.support;
  c.lambda_floor.assign(c.base_count(), {});
  auto& aux = c.aux_system;
  // gamma(x) (or the dispersion multiplier m(x)) always comes first.
  const int gamma = aux.add_variables(X);
  for (int x = 0; x < X; ++x)
    for (int r = 0; r < R; ++r) c.lambda_floor[c.base_index(r, x)].emplace_back(gamma + x, 1.0);
  switch (spec.kind) {
    case StructureKind::separable: {
      Terms sum;
      for (int x = 0; x < X; ++x) sum.emplace_back(gamma + x, 1.0);
      aux.add_eq(std::move(sum), 0.0);
      if (!spec.arm_constraints.empty())
        for (int x = 0; x < X; ++x)
          for (const auto& ac : spec.arm_constraints[x]) {
            const int w = aux.add_variables(1);
            aux.add_ge({{w, 1.0}}, 0.0);
            for (int r = 0; r < R; ++r) c.lambda_floor[c.base_index(r, x)].emplace_back(w, ac.coeffs[r] - ac.rhs);
          }
      break;
    }
    case StructureKind::lipschitz: {
      Terms balance;
      for (int x = 0; x < X; ++x) balance.emplace_back(gamma + x, 1.0);
      for (const auto& [x, y] : lipschitz_pairs(spec)) {
        const int lam = aux.add_variables(1);
        aux.add_ge({{lam, 1.0}}, 0.0);
        balance.emplace_back(lam, -spec.lipschitz * spec.distance(x, y));
        for (int r = 0; r < R; ++r) {
          if (sup[r] == 0.0) continue;
          c.lambda_floor[c.base_index(r, x)].emplace_back(lam, -sup[r]);
          c.lambda_floor[c.base_index(r, y)].emplace_back(lam, sup[r]);
        }
      }
      aux.add_eq(std::move(balance), 0.0);
      break;
    }
    case StructureKind::linear: {
      Terms sum;
      for (int x = 0; x < X; ++x) sum.emplace_back(gamma + x, 1.0);
      aux.add_eq(std::move(sum), 0.0);
      const int nu = aux.add_variables(X);
      for (int x = 0; x < X; ++x)
        for (int r = 0; r < R; ++r)
          if (sup[r] != 0.0) c.lambda_floor[c.base_index(r, x)].emplace_back(nu + x, sup[r]);
      for (int j = 0; j < spec.features.cols(); ++j) {
        Terms t;
        for (int x = 0; x < X; ++x)
          if (spec.features(x, j) != 0.0) t.emplace_back(nu + x, spec.features(x, j));
        aux.add_eq(std::move(t), 0.0);
      }
      break;
    }
    case StructureKind::dispersion: {
      Terms sum;
      for (int x = 0; x < X; ++x) sum.emplace_back(gamma + x, 1.0);
      aux.add_eq(std::move(sum), 0.0);
      const int nu = aux.add_variables(X);
      for (int x = 0; x < X; ++x) {
        aux.add_ge({{nu + x, 1.0}}, 0.0);
        for (int r = 0; r < R; ++r) {
          const double a = spec.dispersion[x] * sup[r] - sup[r] * sup[r];
          if (a != 0.0) c.lambda_floor[c.base_index(r, x)].emplace_back(nu + x, a);
        }
      }
      break;
    }
  }
  c.aux_count = aux.variable_count;
  // Full system over (lambda, aux).
  const int B = c.base_count();
  c.system = aux.embedded(B, B + c.aux_count);
  for (int i = 0; i < B; ++i) {
    Terms t{{i, 1.0}};
    for (const auto& [j, a] : c.lambda_floor[i]) t.emplace_back(B + j, -a);
    c.system.add_ge(std::move(t), 0.0);
  }
  return c;
}

Eigen::VectorXd flatten(const RewardMatrix& P) {
  return Eigen::Map<const Eigen::VectorXd>(P.probs().data(), P.probs().size());
}

RewardMatrix unflatten(const RewardSupport& support, int arms, const Eigen::VectorXd& v) {
  Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(v.data(), static_cast<Eigen::Index>(support.size()), arms);
  return RewardMatrix(support, std::move(m));
}

namespace {

// Restricts a system to its non-base variables by fixing the base values.
LinearSystem fix_base(const LinearSystem& sys, int base_count, const Eigen::VectorXd& base, double slack) {
  LinearSystem out;
  out.variable_count = sys.variable_count - base_count;
  auto reduce = [&](const SparseRow& row) {
    SparseRow r;
    r.rhs = row.rhs;
    for (const auto& [i, a] : row.terms) {
      if (i < base_count) r.rhs -= a * base[i];
      else r.terms.emplace_back(i - base_count, a);
    }
    return r;
  };
  for (const auto& row : sys.equalities) {
    SparseRow r = reduce(row);
    if (r.terms.empty()) {
      if (std::abs(r.rhs) > slack) out.add_ge({}, 1.0);  // marks infeasible
      continue;
    }
    out.equalities.push_back(std::move(r));
  }
  for (const auto& row : sys.inequalities) {
    SparseRow r = reduce(row);
    r.rhs -= slack;
    if (r.terms.empty()) {
      if (r.rhs > 0) out.add_ge({}, 1.0);
      continue;
    }
    out.inequalities.push_back(std::move(r));
  }
  return out;
}

bool system_feasible(const LinearSystem& sys) {
  for (const auto& row : sys.inequalities)
    if (row.terms.empty() && row.rhs > 0) return false;
  if (sys.variable_count == 0) return sys.equalities.empty();
  ConicProgram p(sys.variable_count);
  p.constraints = sys;
  return lp_solve(p).status == SolveStatus::optimal;
}

Solution solve_model_lp(const StructureSpec& spec, const Eigen::VectorXd& base_objective,
                        const std::vector<std::pair<int, double>>& fixed) {
  const ConeDescription cone = primal_cone(spec);
  ConicProgram p(cone.variable_count());
  p.constraints = model_system(spec);
  p.objective.head(cone.base_count()) = base_objective;
  for (const auto& [i, v] : fixed) p.constraints.add_eq({{i, 1.0}}, v);
  return lp_solve(p);
}

}  // namespace

bool cone_contains(const ConeDescription& cone, const Eigen::VectorXd& base, double tol) {
  if (base.size() != cone.base_count()) throw std::invalid_argument("base vector has the wrong length");
  return system_feasible(fix_base(cone.system, cone.base_count(), base, tol));
}

LinearSystem model_system(const StructureSpec& spec) {
  const ConeDescription cone = primal_cone(spec);
  LinearSystem sys = cone.system;
  sys.add_eq({{cone.mass_index, 1.0}}, 1.0);
  return sys;
}

bool is_feasible(const StructureSpec& spec, const RewardMatrix& P, double tol) {
  if (P.arms() != spec.arms || P.levels() != spec.levels()) return false;
  const ConeDescription cone = primal_cone(spec);
  return system_feasible(fix_base(model_system(spec), cone.base_count(), flatten(P), tol));
}

std::optional<double> rew_max_lp(const StructureSpec& spec, const RewardMatrix& P, int x) {
  const int R = spec.levels();
  Eigen::VectorXd obj = Eigen::VectorXd::Zero(R * spec.arms);
  for (int r = 0; r < R; ++r) obj[r + R * x] = -spec.support[r];
  std::vector<std::pair<int, double>> fixed;
  for (int o : optimal_arms(P))
    for (int r = 0; r < R; ++r) fixed.emplace_back(r + R * o, P(r, o));
  const Solution s = solve_model_lp(spec, obj, fixed);
  if (s.status != SolveStatus::optimal) return std::nullopt;
  return -s.objective;
}

double rew_max(const StructureSpec& spec, const RewardMatrix& P, int x) {
  const auto opt = optimal_arms(P);
  if (spec.kind == StructureKind::separable && spec.arm_constraints.empty())
    return std::find(opt.begin(), opt.end(), x) != opt.end() ? mean_reward(P, x) : spec.support.max();
  if (spec.kind == StructureKind::lipschitz && opt.size() == 1 && spec.support.min() == 0.0 &&
      spec.support.max() == 1.0 && spec.levels() == 2) {
    const double best = mean_reward(P, opt[0]);
    return std::min(1.0, best + spec.lipschitz * spec.distance(x, opt[0]));
  }
  const auto v = rew_max_lp(spec, P, x);
  if (!v) throw std::runtime_error("no model agrees with P on its optimal arms");
  return *v;
}

bool ArmClasses::is_deceitful(int x) const {
  return std::find(deceitful.begin(), deceitful.end(), x) != deceitful.end();
}

ArmClasses classify_arms(const StructureSpec& spec, const RewardMatrix& P) {
  ArmClasses out;
  out.optimal = optimal_arms(P);
  out.rew_max.assign(P.arms(), -kInf);
  const double best = best_arm_and_value(P).value;
  for (int x = 0; x < P.arms(); ++x) {
    if (std::find(out.optimal.begin(), out.optimal.end(), x) != out.optimal.end()) continue;
    double v;
    try {
      v = rew_max(spec, P, x);
    } catch (const std::runtime_error&) {
      out.model_infeasible = true;
      v = -kInf;
    }
    out.rew_max[x] = v;
    if (v > best + kDeceitTolerance) out.deceitful.push_back(x);
    else out.non_deceitful.push_back(x);
  }
  if (out.model_infeasible) {
    out.non_deceitful.insert(out.non_deceitful.end(), out.deceitful.begin(), out.deceitful.end());
    std::sort(out.non_deceitful.begin(), out.non_deceitful.end());
    out.deceitful.clear();
  }
  return out;
}

RewardMatrix project_l1(const StructureSpec& spec, const RewardMatrix& Q) {
  const ConeDescription cone = primal_cone(spec);
  const int B = cone.base_count();
  const int n0 = cone.variable_count();
  ConicProgram p(n0 + 2 * B);
  p.constraints = model_system(spec);
  p.constraints.variable_count = p.variable_count;
  const Eigen::VectorXd q = flatten(Q);
  for (int i = 0; i < B; ++i) {
    const int ep = n0 + i, em = n0 + B + i;
    p.constraints.add_ge({{ep, 1.0}}, 0.0);
    p.constraints.add_ge({{em, 1.0}}, 0.0);
    p.constraints.add_eq({{i, 1.0}, {ep, -1.0}, {em, 1.0}}, q[i]);
    p.objective[ep] = p.objective[em] = 1.0;
  }
  const Solution s = lp_solve(p);
  if (s.status != SolveStatus::optimal) throw std::runtime_error("structure admits no distribution");
  Eigen::VectorXd v = s.x.head(B).cwiseMax(0.0);
  RewardMatrix out = unflatten(Q.support(), Q.arms(), v);
  for (int x = 0; x < out.arms(); ++x) out.probs().col(x) /= out.probs().col(x).sum();
  return out;
}

RewardMatrix sample_model_member(const StructureSpec& spec, std::mt19937_64& rng, int vertices) {
  const int B = spec.levels() * spec.arms;
  std::normal_distribution<double> N(0.0, 1.0);
  std::exponential_distribution<double> E(1.0);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(B);
  double wsum = 0.0;
  for (int k = 0; k < vertices; ++k) {
    Eigen::VectorXd c(B);
    for (int i = 0; i < B; ++i) c[i] = N(rng);
    const Solution s = solve_model_lp(spec, c, {});
    if (s.status != SolveStatus::optimal) throw std::runtime_error("structure admits no distribution");
    const double w = E(rng);
    acc += w * s.x.head(B);
    wsum += w;
  }
  acc /= wsum;
  acc = acc.cwiseMax(0.0);
  RewardMatrix out = unflatten(spec.support, spec.arms, acc);
  for (int x = 0; x < out.arms(); ++x) out.probs().col(x) /= out.probs().col(x).sum();
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_dual_member(const StructureSpec& spec, std::mt19937_64& rng) {
  const ConeDescription cone = dual_cone(spec);
  std::normal_distribution<double> N(0.0, 1.0);
  std::exponential_distribution<double> E(1.0);
  const int X = spec.arms;
  Eigen::VectorXd aux = Eigen::VectorXd::Zero(cone.aux_count);
  auto zero_mean_gamma = [&](double target) {
    double s = 0.0;
    for (int x = 0; x < X; ++x) s += (aux[x] = N(rng));
    for (int x = 0; x < X; ++x) aux[x] += (target - s) / X;
  };
  switch (spec.kind) {
    case StructureKind::separable:
      for (int k = X; k < cone.aux_count; ++k) aux[k] = E(rng);
      zero_mean_gamma(0.0);
      break;
    case StructureKind::lipschitz: {
      const auto pairs = lipschitz_pairs(spec);
      double total = 0.0;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        aux[X + static_cast<int>(k)] = E(rng);
        total += spec.lipschitz * spec.distance(pairs[k].first, pairs[k].second) * aux[X + static_cast<int>(k)];
      }
      zero_mean_gamma(total);
      break;
    }
    case StructureKind::linear: {
      zero_mean_gamma(0.0);
      Eigen::VectorXd nu(X);
      for (int x = 0; x < X; ++x) nu[x] = N(rng);
      const Eigen::MatrixXd& C = spec.features;
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C);
      nu -= C * cod.solve(nu);
      aux.segment(X, X) = nu;
      break;
    }
    case StructureKind::dispersion:
      zero_mean_gamma(0.0);
      for (int x = 0; x < X; ++x) aux[X + x] = E(rng);
      break;
  }
  Eigen::VectorXd lambda(cone.base_count());
  for (int i = 0; i < cone.base_count(); ++i) {
    double f = 0.0;
    for (const auto& [j, a] : cone.lambda_floor[i]) f += a * aux[j];
    lambda[i] = f + (rng() % 2 == 0 ? 0.0 : E(rng));
  }
  return {lambda, aux};
}

}  // namespace dualstruct
