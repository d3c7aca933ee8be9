#include "dualstruct/infodual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dualstruct/conic.hpp"

namespace dualstruct {

DualVars DualVars::zeros(int levels, int arms, int aux_count) {
  DualVars mu;
  mu.lambda = Eigen::MatrixXd::Zero(levels, arms);
  mu.aux = Eigen::VectorXd::Zero(aux_count);
  return mu;
}

DualVars DualVars::scaled(double rho) const {
  DualVars out = *this;
  out.alpha *= rho;
  out.beta *= rho;
  out.lambda *= rho;
  out.aux *= rho;
  return out;
}

bool DualVars::is_zero() const {
  return alpha == 0.0 && beta == 0.0 && (lambda.size() == 0 || lambda.cwiseAbs().maxCoeff() == 0.0);
}

bool dual_feasible(const ConeDescription& dual, const DualVars& mu, double tol) {
  if (mu.alpha < -tol) return false;
  if (mu.aux.size() != dual.aux_count) return false;
  Eigen::VectorXd v(dual.variable_count());
  v << Eigen::Map<const Eigen::VectorXd>(mu.lambda.data(), mu.lambda.size()), mu.aux;
  return dual.system.violation(v) <= tol;
}

double info_distance(const Eigen::VectorXd& Mp, const Eigen::VectorXd& M) {
  if (Mp.size() != M.size()) throw std::invalid_argument("measures must share a support");
  double s = 0.0;
  for (Eigen::Index r = 0; r < M.size(); ++r) {
    const double a = Mp[r], b = M[r];
    if (a < 0 || b < 0) throw std::invalid_argument("measures must be nonnegative");
    if (a > 0) {
      if (b == 0) return kInf;
      s += a * std::log(a / b);
    }
    s += b - a;
  }
  return std::max(s, 0.0);
}

double bernoulli_kl(double p, double q) {
  double s = 0.0;
  if (p > 0) {
    if (q <= 0) return kInf;
    s += p * std::log(p / q);
  }
  if (p < 1) {
    if (q >= 1) return kInf;
    s += (1 - p) * std::log((1 - p) / (1 - q));
  }
  return std::max(s, 0.0);
}

ChainSides kl_chain_decomposition(const Eigen::VectorXd& Phat, const Eigen::VectorXd& P, double N) {
  const Eigen::Index k = P.size();
  if (Phat.size() != k || k < 2) throw std::invalid_argument("need two measures on a common support of size >= 2");
  ChainSides out{0.0, 0.0};
  if (N == 0.0) return out;
  out.left = N * info_distance(Phat, P);
  // Tail masses from the top, so a level's conditional probability avoids 1 - prefix cancellation.
  Eigen::VectorXd tail_hat(k + 1), tail(k + 1);
  tail_hat[k] = tail[k] = 0.0;
  for (Eigen::Index r = k - 1; r >= 0; --r) {
    tail_hat[r] = tail_hat[r + 1] + Phat[r];
    tail[r] = tail[r + 1] + P[r];
  }
  for (Eigen::Index r = 0; r + 1 < k; ++r) {
    const double n_r = N * tail_hat[r];
    if (n_r == 0.0) continue;
    if (tail[r] == 0.0) return {out.left, kInf};
    out.right += n_r * bernoulli_kl(Phat[r] / tail_hat[r], P[r] / tail[r]);
  }
  return out;
}

std::vector<int> suboptimal_arms(const RewardMatrix& P) {
  const auto opt = optimal_arms(P);
  std::vector<int> out;
  for (int x = 0; x < P.arms(); ++x)
    if (std::find(opt.begin(), opt.end(), x) == opt.end()) out.push_back(x);
  return out;
}

namespace {

// Terms of the dual function along the ray rho * mu:
//   g(rho) = sum_k w_k log(1 - rho * a_k) + rho * lin, domain rho * a_j <= 1 for all j.
struct Ray {
  std::vector<double> w, a;   // log terms (w = eta P > 0, a = c / eta)
  double rho_max = kInf;      // domain boundary
  double lin = 0.0;
  bool dead = false;          // domain is {0} with rho_max = 0

  double operator()(double rho) const {
    if (rho > rho_max) return -kInf;
    double s = rho * lin;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double arg = 1.0 - rho * a[k];
      if (!(arg > 0.0)) return -kInf;
      s += w[k] * std::log(arg);
    }
    return s;
  }
};

Ray build_ray(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu) {
  Ray ray;
  const auto opt = optimal_arms(P);
  const int R = P.levels();
  const auto& sup = P.support();
  for (int x = 0; x < P.arms(); ++x) {
    const bool is_opt = std::find(opt.begin(), opt.end(), x) != opt.end();
    for (int r = 0; r < R; ++r) {
      if (is_opt) {
        ray.lin -= mu.lambda(r, x) * P(r, x);
        continue;
      }
      const double c = mu.lambda(r, x) + mu.beta + (x == xp ? mu.alpha * sup[r] : 0.0);
      if (c > 0.0) {
        if (eta[x] <= 0.0) {
          ray.rho_max = 0.0;
          continue;
        }
        ray.rho_max = std::min(ray.rho_max, eta[x] / c);
      }
      if (eta[x] > 0.0 && P(r, x) > 0.0 && c != 0.0) {
        ray.w.push_back(eta[x] * P(r, x));
        ray.a.push_back(c / eta[x]);
      }
    }
  }
  ray.lin += mu.alpha * best_arm_and_value(P).value + mu.beta * static_cast<double>(P.arms() - opt.size());
  return ray;
}

}  // namespace

double dual_value(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu) {
  const auto opt = optimal_arms(P);
  const int R = P.levels();
  const auto& sup = P.support();
  double s = 0.0;
  for (int x = 0; x < P.arms(); ++x) {
    if (std::find(opt.begin(), opt.end(), x) != opt.end()) continue;
    for (int r = 0; r < R; ++r) {
      const double c = mu.lambda(r, x) + mu.beta + (x == xp ? mu.alpha * sup[r] : 0.0);
      const double inner = eta[x] - c;
      if (inner < 0.0) return -kInf;
      if (eta[x] == 0.0 || P(r, x) == 0.0) continue;
      if (inner == 0.0) return -kInf;
      s += eta[x] * P(r, x) * std::log(inner / eta[x]);
    }
  }
  for (int x : opt)
    for (int r = 0; r < R; ++r) s -= mu.lambda(r, x) * P(r, x);
  s += mu.alpha * best_arm_and_value(P).value + mu.beta * static_cast<double>(P.arms() - opt.size());
  return s;
}

DualTest dual_test_argmax(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu) {
  const Ray g = build_ray(eta, xp, P, mu);
  DualTest best{0.0, 0.0};
  if (g.rho_max <= 0.0) return best;

  // Bracket: double rho until the value drops or the domain boundary is reached.
  double hi;
  if (std::isfinite(g.rho_max)) {
    hi = g.rho_max;
  } else {
    double prev = 0.0;
    hi = 1.0;
    while (true) {
      const double v = g(hi);
      if (v <= prev) break;
      if (hi > 1e30) return {kInf, kInf};
      prev = v;
      hi *= 2.0;
    }
  }
  // Golden-section search on [0, hi].
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = g(c), fd = g(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = g(d);
    }
  }
  for (double rho : {a, b, 0.5 * (a + b), c, d}) {
    const double v = g(rho);
    if (v > best.value) best = {v, rho};
  }
  return best;
}

// Probabilities this small carry no information but leave a cone the barrier cannot centre.
constexpr double kNegligibleMass = 1e-14;

double dist_oracle(const RateVector& eta, int xp, const RewardMatrix& P, const StructureSpec& spec, double tol) {
  const auto cls = classify_arms(spec, P);
  if (!cls.is_deceitful(xp)) return kInf;
  const auto sub = suboptimal_arms(P);
  const int R = P.levels();
  const auto cone = primal_cone(spec);
  ConicProgram prog(cone.variable_count());
  prog.constraints = model_system(spec);
  for (int o : cls.optimal)
    for (int r = 0; r < R; ++r) prog.constraints.add_eq({{cone.base_index(r, o), 1.0}}, P(r, o));
  {
    Terms t;
    for (int r = 0; r < R; ++r) t.emplace_back(cone.base_index(r, xp), spec.support[r]);
    prog.constraints.add_ge(std::move(t), best_arm_and_value(P).value);
  }
  bool any = false;
  for (int x : sub) {
    if (eta[x] <= 0.0) continue;
    for (int r = 0; r < R; ++r) {
      if (P(r, x) <= kNegligibleMass) continue;
      const int t = prog.add_variables(1);
      prog.objective[t] = eta[x];
      prog.triples.push_back({AffineExpr::var(t, -1.0), AffineExpr::var(cone.base_index(r, x)),
                              AffineExpr::constant_value(P(r, x))});
      any = true;
    }
  }
  if (!any) return 0.0;
  const Solution s = solve(prog, tol);
  if (!s.ok()) throw std::runtime_error("distance program failed: " + to_string(s.status));
  return std::max(0.0, s.objective);
}

double halfspace_distance(const RateVector& eta, int xp, const RewardMatrix& P, const DualVars& mu, double tol) {
  const auto opt = optimal_arms(P);
  const auto sub = suboptimal_arms(P);
  const int R = P.levels();
  const auto& sup = P.support();
  const int X = P.arms();
  // Q(r, x) for suboptimal x, then epigraph variables.
  ConicProgram prog(static_cast<int>(sub.size()) * R);
  auto qi = [&](int k, int r) { return k * R + r; };
  Terms half;
  double rhs = mu.beta * X + mu.alpha * best_arm_and_value(P).value;
  for (int x : opt)
    for (int r = 0; r < R; ++r) rhs -= P(r, x) * (mu.lambda(r, x) + mu.beta);
  double constant = 0.0;
  for (std::size_t k = 0; k < sub.size(); ++k) {
    const int x = sub[k];
    for (int r = 0; r < R; ++r) {
      const double c = mu.lambda(r, x) + mu.beta + (x == xp ? mu.alpha * sup[r] : 0.0);
      if (c != 0.0) half.emplace_back(qi(static_cast<int>(k), r), c);
      prog.objective[qi(static_cast<int>(k), r)] += eta[x];
      constant -= eta[x] * P(r, x);
      if (P(r, x) > kNegligibleMass && eta[x] > 0.0) {
        const int t = prog.add_variables(1);
        prog.objective[t] = eta[x];
        prog.triples.push_back({AffineExpr::var(t, -1.0), AffineExpr::var(qi(static_cast<int>(k), r)),
                                AffineExpr::constant_value(P(r, x))});
      } else {
        prog.constraints.add_ge({{qi(static_cast<int>(k), r), 1.0}}, 0.0);
      }
    }
  }
  if (!half.empty()) prog.constraints.add_ge(std::move(half), rhs);
  else if (rhs > 0) return kInf;
  const Solution s = solve(prog, tol);
  if (s.status == SolveStatus::infeasible) return kInf;
  if (!s.ok()) throw std::runtime_error("half-space program failed: " + to_string(s.status));
  return std::max(0.0, s.objective + constant);
}

}  // namespace dualstruct
