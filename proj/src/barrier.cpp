// Primal barrier method for linear rows plus exponential-cone triples.
//
// Each Newton system is solved blockwise. Variables are grouped into connected
// components of the constraint graph once the linking variables are removed;
// each component gets a dense factorization and the linking variables a dense
// Schur complement. With no linking hint the whole problem is one block.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

#include "dualstruct/conic.hpp"

namespace dualstruct {

namespace {
constexpr double kInfinity = std::numeric_limits<double>::infinity();
}

int ConicProgram::add_variables(int k) {
  const int first = variable_count;
  variable_count += k;
  constraints.variable_count = variable_count;
  objective.conservativeResize(variable_count);
  objective.tail(k).setZero();
  if (quad.size() > 0) {
    quad.conservativeResize(variable_count);
    quad.tail(k).setZero();
  }
  return first;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max-iter";
  }
  return "unknown";
}

double objective_value(const ConicProgram& prog, const Eigen::VectorXd& x) {
  double f = prog.objective.dot(x);
  if (prog.quad.size() > 0) f += prog.quad.dot(x.cwiseAbs2());
  return f;
}

namespace {

// Returns true and fills z when (u,v,w) is interior.
inline bool exp_interior(double u, double v, double w, double& z) {
  if (!(v > 0.0) || !(w > 0.0)) return false;
  z = w * std::log(v / w) - u;
  return z > 0.0;
}

double triple_violation(double u, double v, double w) {
  if (w > 1e-300) {
    const double e = u / w;
    if (e > 700.0) return std::max(u, v < 0 ? -v : 0.0);
    return std::max({0.0, w * std::exp(e) - v, -v});
  }
  return std::max({0.0, u, -v, -w});
}

}  // namespace

double max_violation(const ConicProgram& prog, const Eigen::VectorXd& x) {
  double worst = prog.constraints.violation(x);
  for (const auto& tr : prog.triples)
    worst = std::max(worst, triple_violation(tr.u.eval(x), tr.v.eval(x), tr.w.eval(x)));
  return worst;
}

namespace {

struct DenseTriple {
  std::vector<int> vars;  // union of referenced variables
  Eigen::Matrix<double, 3, Eigen::Dynamic> T;
  Eigen::Vector3d c;
};

class Engine {
 public:
  Engine(const ConicProgram& prog, std::vector<int> linking) : prog_(prog), n_(prog.variable_count) {
    build_triples();
    partition(std::move(linking));
    build_destinations();
  }
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  int nu() const {
    return static_cast<int>(prog_.constraints.inequalities.size()) + 2 * n_ +
           3 * static_cast<int>(triples_.size());
  }

  double f(const Eigen::VectorXd& x) const { return objective_value(prog_, x); }

  // Barrier value, +inf outside the interior.
  double phi(const Eigen::VectorXd& x) const {
    double s = 0.0;
    const double B = prog_.box;
    for (int i = 0; i < n_; ++i) {
      const double a = B - x[i], b = B + x[i];
      if (!(a > 0.0) || !(b > 0.0)) return kInfinity;
      s -= std::log(a) + std::log(b);
    }
    for (const auto& row : prog_.constraints.inequalities) {
      const double sl = row.dot(x) - row.rhs;
      if (!(sl > 0.0)) return kInfinity;
      s -= std::log(sl);
    }
    for (const auto& tr : triples_) {
      Eigen::Vector3d uvw = tr.c;
      for (int k = 0; k < static_cast<int>(tr.vars.size()); ++k) uvw += tr.T.col(k) * x[tr.vars[k]];
      double z;
      if (!exp_interior(uvw[0], uvw[1], uvw[2], z)) return kInfinity;
      s -= std::log(z) + std::log(uvw[1]) + std::log(uvw[2]);
    }
    return s;
  }

  // Largest step along d that keeps every linear row and box row strictly feasible.
  double max_linear_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const {
    double a = kInfinity;
    const double B = prog_.box;
    for (int i = 0; i < n_; ++i) {
      if (d[i] > 0) a = std::min(a, (B - x[i]) / d[i]);
      else if (d[i] < 0) a = std::min(a, (B + x[i]) / -d[i]);
    }
    for (const auto& row : prog_.constraints.inequalities) {
      const double gd = row.dot(d);
      if (gd < 0) a = std::min(a, (row.dot(x) - row.rhs) / -gd);
    }
    return a;
  }

  // Fills gradient and blockwise Hessian of t*f + phi at an interior x.
  void assemble(const Eigen::VectorXd& x, double t) {
    grad_.setZero(n_);
    for (auto& b : blocks_) {
      b.H.setZero();
      b.HL.setZero();
    }
    HLL_.setZero();
    grad_ = t * prog_.objective;
    const double B = prog_.box;
    for (int i = 0; i < n_; ++i) {
      double q = 0.0;
      if (prog_.quad.size() > 0) {
        q = 2.0 * t * prog_.quad[i];
        grad_[i] += q * x[i];
      }
      const double a = B - x[i], b = B + x[i];
      grad_[i] += 1.0 / a - 1.0 / b;
      add(i, i, q + 1.0 / (a * a) + 1.0 / (b * b));
    }
    const auto& rows = prog_.constraints.inequalities;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = rows[k];
      const double sl = row.dot(x) - row.rhs;
      const double inv = 1.0 / sl;
      for (const auto& [i, a] : row.terms) grad_[i] -= a * inv;
      const double inv2 = inv * inv;
      double* const* dest = row_dest_[k].data();
      for (const auto& ta : row.terms) {
        const double ai = ta.second * inv2;
        for (const auto& tb : row.terms) {
          if (*dest) **dest += ai * tb.second;
          ++dest;
        }
      }
    }
    for (std::size_t ti = 0; ti < triples_.size(); ++ti) {
      const auto& tr = triples_[ti];
      const int k = static_cast<int>(tr.vars.size());
      Eigen::Vector3d uvw = tr.c;
      for (int j = 0; j < k; ++j) uvw += tr.T.col(j) * x[tr.vars[j]];
      const double u = uvw[0], v = uvw[1], w = uvw[2];
      const double lg = std::log(v / w);
      const double z = w * lg - u;
      Eigen::Vector3d gz(-1.0, w / v, lg - 1.0);
      Eigen::Matrix3d Hz = Eigen::Matrix3d::Zero();
      Hz(1, 1) = -w / (v * v);
      Hz(1, 2) = Hz(2, 1) = 1.0 / v;
      Hz(2, 2) = -1.0 / w;
      Eigen::Vector3d g = -gz / z;
      g[1] -= 1.0 / v;
      g[2] -= 1.0 / w;
      Eigen::Matrix3d H = gz * gz.transpose() / (z * z) - Hz / z;
      H(1, 1) += 1.0 / (v * v);
      H(2, 2) += 1.0 / (w * w);
      double* const* dest = triple_dest_[ti].data();
      for (int a = 0; a < k; ++a) {
        const Eigen::Vector3d ta = tr.T.col(a);
        grad_[tr.vars[a]] += ta.dot(g);
        const Eigen::Vector3d hta = H * ta;
        for (int b = 0; b < k; ++b, ++dest)
          if (*dest) **dest += hta.dot(tr.T.col(b));
      }
    }
  }

  const Eigen::VectorXd& grad() const { return grad_; }

  // Factors the KKT system for the last assembled Hessian.
  bool factor() {
    for (auto& b : blocks_) {
      if (!factor_group(b.H, b.A, b.AtA, b.fac)) return false;
      if (nL_ > 0) {
        Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(b.A.rows(), nL_);
        b.Z = solve_group(b.fac, b.A, b.HL, zero);
      }
    }
    if (nL_ > 0) {
      SL_ = HLL_;
      for (const auto& b : blocks_) SL_.noalias() -= b.HL.transpose() * b.Z;
      SL_ = 0.5 * (SL_ + SL_.transpose()).eval();
      if (!factor_group(SL_, AL_, ALtAL_, facL_)) return false;
    }
    return true;
  }

  // Solves H d + A'y = rhs, A d = eq_rhs (both in global ordering).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd& eq_rhs) const {
    Eigen::VectorXd d(n_);
    std::vector<Eigen::VectorXd> zb(blocks_.size());
    Eigen::VectorXd rl(nL_);
    for (int j = 0; j < nL_; ++j) rl[j] = rhs[lvars_[j]];
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& b = blocks_[bi];
      Eigen::VectorXd r1(b.vars.size()), r2(b.eqs.size());
      for (std::size_t j = 0; j < b.vars.size(); ++j) r1[j] = rhs[b.vars[j]];
      for (std::size_t j = 0; j < b.eqs.size(); ++j) r2[j] = eq_rhs[b.eqs[j]];
      zb[bi] = solve_group(b.fac, b.A, r1, r2);
      if (nL_ > 0) rl.noalias() -= b.HL.transpose() * zb[bi];
    }
    Eigen::VectorXd dl;
    if (nL_ > 0) {
      Eigen::VectorXd r2(leqs_.size());
      for (std::size_t j = 0; j < leqs_.size(); ++j) r2[j] = eq_rhs[leqs_[j]];
      dl = solve_group(facL_, AL_, rl, r2);
      for (int j = 0; j < nL_; ++j) d[lvars_[j]] = dl[j];
    }
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& b = blocks_[bi];
      Eigen::VectorXd xb = zb[bi];
      if (nL_ > 0) xb.noalias() -= b.Z * dl;
      for (std::size_t j = 0; j < b.vars.size(); ++j) d[b.vars[j]] = xb[j];
    }
    return d;
  }

 private:
  struct Factor {
    Eigen::LLT<Eigen::MatrixXd> K;
    Eigen::MatrixXd W;  // K^{-1} A'
    Eigen::LDLT<Eigen::MatrixXd> S;
    Eigen::MatrixXd Kbuf;
    double omega = 0.0;
  };
  struct Block {
    std::vector<int> vars;
    std::vector<int> eqs;
    Eigen::MatrixXd H, HL, A, AtA, Z;
    Factor fac;
  };

  void build_triples() {
    for (const auto& tr : prog_.triples) {
      DenseTriple d;
      const AffineExpr* parts[3] = {&tr.u, &tr.v, &tr.w};
      for (const auto* p : parts)
        for (const auto& t : p->terms) d.vars.push_back(t.first);
      std::sort(d.vars.begin(), d.vars.end());
      d.vars.erase(std::unique(d.vars.begin(), d.vars.end()), d.vars.end());
      d.T = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, static_cast<Eigen::Index>(d.vars.size()));
      for (int r = 0; r < 3; ++r) {
        d.c[r] = parts[r]->constant;
        for (const auto& [i, a] : parts[r]->terms) {
          const auto pos = std::lower_bound(d.vars.begin(), d.vars.end(), i) - d.vars.begin();
          d.T(r, pos) += a;
        }
      }
      triples_.push_back(std::move(d));
    }
  }

  void partition(std::vector<int> linking) {
    std::vector<char> is_link(n_, 0);
    for (int i : linking)
      if (i >= 0 && i < n_) is_link[i] = 1;
    // An equality row mixing linking and grouped variables defeats the elimination
    // order, so fall back to a single group in that case.
    for (const auto& row : prog_.constraints.equalities) {
      bool has_link = false, has_other = false;
      for (const auto& t : row.terms) (is_link[t.first] ? has_link : has_other) = true;
      if (has_link && has_other) {
        std::fill(is_link.begin(), is_link.end(), 0);
        break;
      }
    }
    std::vector<int> parent(n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    auto unite_all = [&](const std::vector<int>& vs) {
      int root = -1;
      for (int v : vs) {
        if (is_link[v]) continue;
        if (root < 0) root = find(v);
        else parent[find(v)] = root;
      }
    };
    auto row_vars = [](const SparseRow& r) {
      std::vector<int> v;
      for (const auto& t : r.terms) v.push_back(t.first);
      return v;
    };
    for (const auto& row : prog_.constraints.inequalities) unite_all(row_vars(row));
    for (const auto& row : prog_.constraints.equalities) unite_all(row_vars(row));
    for (const auto& tr : triples_) unite_all(tr.vars);

    var_block_.assign(n_, -1);
    var_local_.assign(n_, -1);
    std::vector<int> root_block(n_, -1);
    for (int i = 0; i < n_; ++i) {
      if (is_link[i]) {
        var_local_[i] = static_cast<int>(lvars_.size());
        lvars_.push_back(i);
        continue;
      }
      const int r = find(i);
      if (root_block[r] < 0) {
        root_block[r] = static_cast<int>(blocks_.size());
        blocks_.emplace_back();
      }
      Block& b = blocks_[root_block[r]];
      var_block_[i] = root_block[r];
      var_local_[i] = static_cast<int>(b.vars.size());
      b.vars.push_back(i);
    }
    nL_ = static_cast<int>(lvars_.size());
    const auto& eqs = prog_.constraints.equalities;
    for (int e = 0; e < static_cast<int>(eqs.size()); ++e) {
      int owner = -1;
      for (const auto& t : eqs[e].terms) owner = var_block_[t.first];
      if (owner >= 0) blocks_[owner].eqs.push_back(e);
      else leqs_.push_back(e);
    }
    for (auto& b : blocks_) {
      const auto nb = static_cast<Eigen::Index>(b.vars.size());
      b.H.resize(nb, nb);
      b.HL.resize(nb, nL_);
      b.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.eqs.size()), nb);
      for (std::size_t k = 0; k < b.eqs.size(); ++k)
        for (const auto& [i, a] : eqs[b.eqs[k]].terms) b.A(static_cast<Eigen::Index>(k), var_local_[i]) += a;
      b.AtA = b.A.transpose() * b.A;
    }
    HLL_.resize(nL_, nL_);
    AL_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(leqs_.size()), nL_);
    for (std::size_t k = 0; k < leqs_.size(); ++k)
      for (const auto& [i, a] : eqs[leqs_[k]].terms) AL_(static_cast<Eigen::Index>(k), var_local_[i]) += a;
    ALtAL_ = AL_.transpose() * AL_;
  }

  // Where H(i, j) lives in the blockwise storage, or null for the entries below the
  // linking rows that the symmetric HL block already holds.
  double* slot(int i, int j) {
    const int bi = var_block_[i], bj = var_block_[j];
    if (bi >= 0) {
      if (bj >= 0) return &blocks_[bi].H(var_local_[i], var_local_[j]);
      return &blocks_[bi].HL(var_local_[i], var_local_[j]);
    }
    if (bj < 0) return &HLL_(var_local_[i], var_local_[j]);
    return nullptr;
  }

  // Storage never moves after partition(), so the pointers stay valid.
  void build_destinations() {
    for (const auto& row : prog_.constraints.inequalities) {
      std::vector<double*> d;
      for (const auto& ta : row.terms)
        for (const auto& tb : row.terms) d.push_back(slot(ta.first, tb.first));
      row_dest_.push_back(std::move(d));
    }
    for (const auto& tr : triples_) {
      std::vector<double*> d;
      for (int a : tr.vars)
        for (int b : tr.vars) d.push_back(slot(a, b));
      triple_dest_.push_back(std::move(d));
    }
  }

  inline void add(int i, int j, double v) {
    const int bi = var_block_[i], bj = var_block_[j];
    if (bi >= 0) {
      if (bj >= 0) blocks_[bi].H(var_local_[i], var_local_[j]) += v;
      else blocks_[bi].HL(var_local_[i], var_local_[j]) += v;
    } else if (bj < 0) {
      HLL_(var_local_[i], var_local_[j]) += v;
    }
  }

  static bool factor_group(const Eigen::MatrixXd& H, const Eigen::MatrixXd& A, const Eigen::MatrixXd& AtA, Factor& fac) {
    fac.omega = 0.0;
    const Eigen::MatrixXd* Kp = &H;
    if (A.rows() > 0) {
      const double ha = std::max(H.diagonal().cwiseAbs().mean(), 1e-12);
      const double aa = std::max(AtA.diagonal().mean(), 1e-300);
      fac.omega = ha / aa;
      fac.Kbuf = H;
      fac.Kbuf.noalias() += fac.omega * AtA;
      Kp = &fac.Kbuf;
    }
    fac.K.compute(*Kp);
    if (fac.K.info() != Eigen::Success) {
      const double scale = std::max(Kp->diagonal().cwiseAbs().maxCoeff(), 1e-300);
      double reg = 1e-14 * scale;
      for (int attempt = 0;; ++attempt, reg *= 100.0) {
        if (attempt == 11) return false;
        Eigen::MatrixXd Kr = *Kp;
        Kr.diagonal().array() += reg;
        fac.K.compute(Kr);
        if (fac.K.info() == Eigen::Success) break;
      }
    }
    if (A.rows() > 0) {
      fac.W = fac.K.solve(A.transpose());
      Eigen::MatrixXd S = A * fac.W;
      S.diagonal().array() += 1e-15 * std::max(S.diagonal().maxCoeff(), 1e-300);
      fac.S.compute(S);
      if (fac.S.info() != Eigen::Success) return false;
    }
    return true;
  }

  template <class R1, class R2>
  static Eigen::MatrixXd solve_group(const Factor& fac, const Eigen::MatrixXd& A, const R1& r1, const R2& r2) {
    if (A.rows() == 0) return fac.K.solve(r1);
    Eigen::MatrixXd x0 = fac.K.solve((r1 + fac.omega * A.transpose() * r2).eval());
    Eigen::MatrixXd y = fac.S.solve((A * x0 - r2).eval());
    return x0 - fac.W * y;
  }

  const ConicProgram& prog_;
  int n_;
  std::vector<DenseTriple> triples_;
  std::vector<int> var_block_, var_local_;
  std::vector<Block> blocks_;
  std::vector<int> lvars_, leqs_;
  int nL_ = 0;
  Eigen::MatrixXd HLL_, AL_, ALtAL_, SL_;
  Factor facL_;
  Eigen::VectorXd grad_;
  std::vector<std::vector<double*>> row_dest_, triple_dest_;
};

struct PathResult {
  Eigen::VectorXd x;
  double t = 0.0;
  double decrement = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stopped_early = false;
  bool numerical_failure = false;
};

Eigen::VectorXd equality_residual(const LinearSystem& sys, const Eigen::VectorXd& x) {
  Eigen::VectorXd r(sys.equalities.size());
  for (std::size_t k = 0; k < sys.equalities.size(); ++k)
    r[static_cast<Eigen::Index>(k)] = sys.equalities[k].rhs - sys.equalities[k].dot(x);
  return r;
}

// Follows the central path from a strictly feasible x until nu / t <= gap_target(f).
PathResult follow_path(const ConicProgram& prog, Engine& eng, Eigen::VectorXd x, double tol,
                       const SolverOptions& opts, int budget,
                       const std::function<bool(const Eigen::VectorXd&)>& stop_early = {}) {
  PathResult res;
  const double nu = eng.nu();
  const int n = prog.variable_count;

  // Initial t balances objective and barrier gradients in the Newton metric.
  double t = 1.0;
  {
    eng.assemble(x, 0.0);
    if (eng.factor()) {
      const Eigen::VectorXd zero_eq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prog.constraints.equalities.size()));
      Eigen::VectorXd gf = prog.objective;
      if (prog.quad.size() > 0) gf += 2.0 * prog.quad.cwiseProduct(x);
      const Eigen::VectorXd df = eng.solve(-gf, zero_eq);
      const Eigen::VectorXd dp = eng.solve(-eng.grad(), zero_eq);
      const double a = -gf.dot(df);
      const double b = -gf.dot(dp);
      if (a > 1e-300 && std::isfinite(b)) t = -b / a;
      if (!(t > 0) || !std::isfinite(t)) t = nu / std::max(1.0, std::abs(eng.f(x)));
      t = std::clamp(t, 1e-6, 1e6);
    }
  }

  int it = 0;
  while (true) {
    // Centering by damped Newton.
    bool centered = false;
    double prev_lam2 = kInfinity;
    int steps_here = 0;
    while (it < budget) {
      eng.assemble(x, t);
      if (!eng.factor()) {
        res.numerical_failure = true;
        break;
      }
      const Eigen::VectorXd r = equality_residual(prog.constraints, x);
      const Eigen::VectorXd& g = eng.grad();
      const Eigen::VectorXd d = eng.solve(-g, r);
      if (!d.allFinite()) {
        res.numerical_failure = true;
        break;
      }
      ++it;
      const double gd = g.dot(d);
      const double lam2 = std::abs(gd);
      res.decrement = lam2;
      const bool final_stage = nu / t <= tol * (1.0 + std::abs(eng.f(x)));
      const double ctol = final_stage ? opts.center_tol : 1e-2;
      // Rounding floor: the decrement stopped shrinking although it is already small.
      ++steps_here;
      // Inside the quadratic region a handful of steps suffice in exact arithmetic, so a long
      // run there means rounding has taken over.
      const bool stalled = (lam2 < 1e-4 && lam2 >= 0.5 * prev_lam2) || (lam2 < 1e-3 && steps_here > 10) ||
                           (lam2 < 1e-1 && steps_here > 15);
      prev_lam2 = lam2;
      if ((lam2 / 2.0 <= ctol || stalled) && r.lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        centered = true;
        break;
      }
      double amax = eng.max_linear_step(x, d);
      double alpha = std::min(1.0, 0.99 * amax);
      const double F0 = t * eng.f(x) + eng.phi(x);
      const bool near = std::sqrt(lam2) < 0.2;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd xn = x + alpha * d;
        if ((xn - x).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
        const double Fn = t * eng.f(xn) + eng.phi(xn);
        if (std::isfinite(Fn) && (near || (Fn < F0 && Fn <= F0 + 0.01 * alpha * gd))) {
          x = xn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
        // Newton cannot make progress at this precision. Report the floor and let
        // the caller judge the gap bound.
        res.numerical_failure = true;
        break;
      }
      if (stop_early && stop_early(x)) {
        res.stopped_early = true;
        res.x = x;
        res.t = t;
        res.iterations = it;
        return res;
      }
    }
    if (!centered) break;
    const double fval = eng.f(x);
    if (nu / t <= tol * (1.0 + std::abs(fval))) {
      res.converged = true;
      break;
    }
    // Tangent predictor: first-order move along the central path to the next t,
    // using the factorization from the last centering step.
    const double t_next = t * opts.mu;
    {
      const Eigen::VectorXd zero_eq =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prog.constraints.equalities.size()));
      Eigen::VectorXd gf = prog.objective;
      if (prog.quad.size() > 0) gf += 2.0 * prog.quad.cwiseProduct(x);
      const Eigen::VectorXd dxt = eng.solve(-gf, zero_eq);
      if (dxt.allFinite()) {
        double step = t_next - t;
        step = std::min(step, 0.9 * eng.max_linear_step(x, dxt));
        for (int k = 0; k < 30 && step > 0; ++k) {
          const Eigen::VectorXd xn = x + step * dxt;
          if (std::isfinite(eng.phi(xn))) {
            x = xn;
            break;
          }
          step *= 0.5;
        }
      }
    }
    t = t_next;
  }
  (void)n;
  res.x = x;
  res.t = t;
  res.iterations = it;
  return res;
}

// Least-norm solution of the equality rows; nullopt if they are inconsistent.
std::optional<Eigen::VectorXd> equality_point(const ConicProgram& prog) {
  const int n = prog.variable_count;
  const auto& eqs = prog.constraints.equalities;
  if (eqs.empty()) return Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eqs.size()), n);
  Eigen::VectorXd b(eqs.size());
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    for (const auto& [i, a] : eqs[k].terms) A(static_cast<Eigen::Index>(k), i) += a;
    b[static_cast<Eigen::Index>(k)] = eqs[k].rhs;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  Eigen::VectorXd x = cod.solve(b);
  if ((A * x - b).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>())) return std::nullopt;
  return x;
}

bool strictly_feasible(const ConicProgram& prog, const Eigen::VectorXd& x) {
  if (x.size() != prog.variable_count) return false;
  if (equality_residual(prog.constraints, x).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>()))
    return false;
  for (int i = 0; i < x.size(); ++i)
    if (!(std::abs(x[i]) < prog.box)) return false;
  for (const auto& row : prog.constraints.inequalities)
    if (!(row.dot(x) - row.rhs > 0.0)) return false;
  for (const auto& tr : prog.triples) {
    double z;
    if (!exp_interior(tr.u.eval(x), tr.v.eval(x), tr.w.eval(x), z)) return false;
  }
  return true;
}

// Phase one: minimize s with every inequality relaxed by s along an interior direction.
std::optional<Eigen::VectorXd> find_interior(const ConicProgram& prog, const SolverOptions& opts, int& iterations,
                                             bool& exhausted, bool pure) {
  exhausted = false;
  auto base = equality_point(prog);
  if (!base) return std::nullopt;
  const int n = prog.variable_count;
  Eigen::VectorXd x0 = *base;
  for (int i = 0; i < n; ++i) x0[i] = std::clamp(x0[i], -0.5 * prog.box, 0.5 * prog.box);
  if (strictly_feasible(prog, x0)) return x0;

  // The original objective rides along with a small weight so that variables bounded
  // only through the objective do not drift to the box while s is driven down.
  ConicProgram p1(n + 1);
  const int s = n;
  const double cscale = std::max(1.0, prog.objective.lpNorm<Eigen::Infinity>());
  p1.objective.head(n) = prog.objective / cscale * (pure ? 0.0 : 1e-3);
  p1.objective[s] = 1.0;
  p1.box = prog.box;
  p1.constraints.equalities = prog.constraints.equalities;
  for (const auto& row : prog.constraints.inequalities) {
    SparseRow r = row;
    r.terms.emplace_back(s, 1.0);
    p1.constraints.inequalities.push_back(std::move(r));
  }
  p1.constraints.add_ge({{s, 1.0}}, -1.0);
  for (const auto& tr : prog.triples) {
    ExpTriple t = tr;
    t.u.terms.emplace_back(s, -1.0);
    t.v.terms.emplace_back(s, 1.0);
    t.w.terms.emplace_back(s, 1.0);
    p1.triples.push_back(std::move(t));
  }
  p1.linking = prog.linking;
  p1.linking.push_back(s);

  double s0 = 1.0;
  for (const auto& row : prog.constraints.inequalities) s0 = std::max(s0, row.rhs - row.dot(x0) + 1.0);
  Eigen::VectorXd y(n + 1);
  y.head(n) = x0;
  for (int k = 0; k < 200; ++k) {
    y[s] = s0;
    if (strictly_feasible(p1, y)) break;
    s0 *= 2.0;
  }
  if (!strictly_feasible(p1, y)) return std::nullopt;

  const double margin = 1e-3;
  Engine eng(p1, p1.linking);
  auto stop = [&](const Eigen::VectorXd& z) { return z[s] < -margin; };
  PathResult pr = follow_path(p1, eng, y, 1e-10, opts, opts.max_newton, stop);
  iterations += pr.iterations;
  if (!pr.converged && !pr.stopped_early) exhausted = true;
  if (pr.x[s] < -1e-10) {
    Eigen::VectorXd x = pr.x.head(n);
    if (strictly_feasible(prog, x)) return x;
  }
  return std::nullopt;
}

// Substitutes variables pinned by single-variable equalities into the other rows and
// drops rows left constant. A tight constant row would otherwise leave no interior.
// Returns false if a constant row is violated.
bool presolve(ConicProgram& prog) {
  const int n = prog.variable_count;
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  auto scale = [](const SparseRow& row) {
    double m = std::abs(row.rhs);
    for (const auto& [i, a] : row.terms) m = std::max(m, std::abs(a));
    return m;
  };
  std::vector<SparseRow> pins;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<SparseRow> kept;
    for (auto& row : prog.constraints.equalities) {
      Terms rest;
      for (const auto& [i, a] : row.terms) {
        if (fixed[i]) row.rhs -= a * value[i];
        else if (a != 0.0) rest.emplace_back(i, a);
      }
      row.terms = std::move(rest);
      if (row.terms.empty()) {
        if (std::abs(row.rhs) > 1e-9 * (1.0 + scale(row))) return false;
        continue;
      }
      if (row.terms.size() == 1) {
        const auto [i, a] = row.terms.front();
        fixed[i] = 1;
        value[i] = row.rhs / a;
        pins.push_back({{{i, 1.0}}, value[i]});
        changed = true;
        continue;
      }
      kept.push_back(std::move(row));
    }
    prog.constraints.equalities = std::move(kept);
  }
  prog.constraints.equalities.insert(prog.constraints.equalities.end(), pins.begin(), pins.end());

  std::vector<SparseRow> ge;
  for (auto& row : prog.constraints.inequalities) {
    Terms rest;
    const double s = scale(row);
    for (const auto& [i, a] : row.terms) {
      if (fixed[i]) row.rhs -= a * value[i];
      else if (a != 0.0) rest.emplace_back(i, a);
    }
    row.terms = std::move(rest);
    if (row.terms.empty()) {
      if (row.rhs > 1e-9 * (1.0 + s)) return false;
      continue;
    }
    ge.push_back(std::move(row));
  }
  prog.constraints.inequalities = std::move(ge);

  auto fold = [&](AffineExpr& e) {
    Terms rest;
    for (const auto& [i, a] : e.terms) {
      if (fixed[i]) e.constant += a * value[i];
      else rest.emplace_back(i, a);
    }
    e.terms = std::move(rest);
  };
  std::vector<ExpTriple> triples;
  for (auto& tr : prog.triples) {
    fold(tr.u);
    fold(tr.v);
    fold(tr.w);
    if (tr.u.terms.empty() && tr.v.terms.empty() && tr.w.terms.empty()) {
      if (triple_violation(tr.u.constant, tr.v.constant, tr.w.constant) > 1e-9) return false;
      continue;
    }
    triples.push_back(std::move(tr));
  }
  prog.triples = std::move(triples);
  return true;
}

}  // namespace

Solution solve(const ConicProgram& original, double tol, const SolverOptions& opts) {
  if (!(tol > 0.0) || tol > 1e-2) throw std::invalid_argument("solver tolerance must lie in (0, 1e-2]");
  const int n = original.variable_count;
  if (original.objective.size() != n) throw std::invalid_argument("objective length mismatch");
  if (original.quad.size() != 0 && original.quad.size() != n)
    throw std::invalid_argument("quadratic length mismatch");
  if (original.quad.size() > 0 && (original.quad.array() < 0).any())
    throw std::invalid_argument("quadratic weights must be nonnegative");

  Solution sol;
  ConicProgram prog = original;
  if (!presolve(prog)) {
    sol.x = Eigen::VectorXd::Zero(n);
    sol.status = SolveStatus::infeasible;
    sol.objective = kInfinity;
    return sol;
  }
  sol.x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x;
  if (prog.start && strictly_feasible(prog, *prog.start)) {
    x = *prog.start;
  } else {
    bool exhausted = false;
    auto start = find_interior(prog, opts, sol.iterations, exhausted, false);
    if (!start) start = find_interior(prog, opts, sol.iterations, exhausted, true);
    if (!start) {
      sol.status = exhausted ? SolveStatus::max_iter : SolveStatus::infeasible;
      sol.objective = kInfinity;
      return sol;
    }
    x = *start;
  }

  Engine eng(prog, prog.linking);
  PathResult pr = follow_path(prog, eng, x, tol, opts, std::max(10, opts.max_newton - sol.iterations));
  sol.iterations += pr.iterations;
  sol.x = pr.x;
  sol.objective = objective_value(prog, pr.x);
  sol.barrier = eng.nu() / pr.t;
  sol.dual_residual = std::sqrt(pr.decrement) / pr.t;
  sol.primal_residual = max_violation(original, pr.x);
  bool at_box = false;
  for (int i = 0; i < n; ++i)
    if (prog.box - std::abs(pr.x[i]) < 1e-3 * prog.box) at_box = true;
  if (at_box) sol.status = SolveStatus::unbounded;
  else if (pr.converged) sol.status = SolveStatus::optimal;
  else if (pr.numerical_failure && sol.barrier <= 100 * tol * (1.0 + std::abs(sol.objective)))
    sol.status = SolveStatus::optimal;
  else sol.status = SolveStatus::max_iter;
  return sol;
}

namespace {

void write_terms(std::ostream& out, const Terms& terms) {
  bool first = true;
  for (const auto& [i, a] : terms) {
    if (!first) out << ' ';
    out << a << "*x" << i;
    first = false;
  }
  if (first) out << '0';
}

void write_affine(std::ostream& out, const AffineExpr& e) {
  write_terms(out, e.terms);
  if (e.constant != 0.0) out << " + " << e.constant;
}

}  // namespace

void dump_program(const ConicProgram& prog, std::ostream& out) {
  out.precision(17);
  out << "variables " << prog.variable_count << '\n';
  out << "minimize";
  for (int i = 0; i < prog.variable_count; ++i)
    if (prog.objective[i] != 0.0) out << ' ' << prog.objective[i] << "*x" << i;
  if (prog.quad.size() > 0)
    for (int i = 0; i < prog.variable_count; ++i)
      if (prog.quad[i] != 0.0) out << ' ' << prog.quad[i] << "*x" << i << "^2";
  out << '\n';
  for (const auto& row : prog.constraints.equalities) {
    out << "eq ";
    write_terms(out, row.terms);
    out << " = " << row.rhs << '\n';
  }
  for (const auto& row : prog.constraints.inequalities) {
    out << "ge ";
    write_terms(out, row.terms);
    out << " >= " << row.rhs << '\n';
  }
  for (const auto& tr : prog.triples) {
    out << "exp (";
    write_affine(out, tr.u);
    out << "), (";
    write_affine(out, tr.v);
    out << "), (";
    write_affine(out, tr.w);
    out << ")\n";
  }
}

}  // namespace dualstruct
