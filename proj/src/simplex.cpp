// Dense two-phase tableau simplex for the LP subclass of ConicProgram.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dualstruct/conic.hpp"

namespace dualstruct {

namespace {

constexpr double kPivotTol = 1e-9;

class Tableau {
 public:
  // Rows 0..m-1 are constraints, row m is the objective (reduced costs); last column is the rhs.
  Tableau(Eigen::MatrixXd t, std::vector<int> basis) : T_(std::move(t)), basis_(std::move(basis)) {}

  int rows() const { return static_cast<int>(T_.rows()) - 1; }
  int cols() const { return static_cast<int>(T_.cols()) - 1; }
  Eigen::MatrixXd& data() { return T_; }
  std::vector<int>& basis() { return basis_; }

  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i <= rows(); ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  // Minimizes the objective row over columns allowed[j]; returns false when unbounded.
  bool optimize(const std::vector<char>& allowed, double tol, int max_iter, bool& out_of_iter) {
    out_of_iter = false;
    int degenerate = 0;
    for (int it = 0; it < max_iter; ++it) {
      const bool bland = degenerate > 50;
      int enter = -1;
      double best = -tol;
      for (int j = 0; j < cols(); ++j) {
        if (!allowed[j]) continue;
        const double rc = T_(rows(), j);
        if (rc < best) {
          enter = j;
          best = rc;
          if (bland) break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows(); ++i) {
        const double a = T_(i, enter);
        if (a > kPivotTol) {
          const double q = T_(i, cols()) / a;
          if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
            ratio = q;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      degenerate = ratio < 1e-12 ? degenerate + 1 : 0;
      pivot(leave, enter);
    }
    out_of_iter = true;
    return true;
  }

  void remove_row(int row) {
    const int m = rows();
    Eigen::MatrixXd t(T_.rows() - 1, T_.cols());
    t << T_.topRows(row), T_.bottomRows(m - row);
    T_ = std::move(t);
    basis_.erase(basis_.begin() + row);
  }

 private:
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
};

}  // namespace

Solution lp_solve(const ConicProgram& prog, double tol) {
  if (!prog.triples.empty()) throw std::invalid_argument("lp_solve needs a program without cone triples");
  if (prog.quad.size() > 0 && prog.quad.cwiseAbs().maxCoeff() > 0)
    throw std::invalid_argument("lp_solve needs a linear objective");
  const int n = prog.variable_count;
  const auto& sys = prog.constraints;

  // Rows of the form a*x_i >= 0 with a > 0 become sign constraints; other variables are split.
  std::vector<char> nonneg(n, 0);
  std::vector<char> consumed(sys.inequalities.size(), 0);
  for (std::size_t k = 0; k < sys.inequalities.size(); ++k) {
    const auto& row = sys.inequalities[k];
    if (row.terms.size() == 1 && row.terms[0].second > 0 && row.rhs == 0.0) {
      nonneg[row.terms[0].first] = 1;
      consumed[k] = 1;
    }
  }
  std::vector<int> pos_col(n), neg_col(n, -1);
  int ncols = 0;
  for (int i = 0; i < n; ++i) {
    pos_col[i] = ncols++;
    if (!nonneg[i]) neg_col[i] = ncols++;
  }
  std::vector<const SparseRow*> ge;
  for (std::size_t k = 0; k < sys.inequalities.size(); ++k)
    if (!consumed[k]) ge.push_back(&sys.inequalities[k]);
  const int slack0 = ncols;
  ncols += static_cast<int>(ge.size());
  const int m = static_cast<int>(sys.equalities.size() + ge.size());
  const int art0 = ncols;
  const int total = ncols + m;

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, total + 1);
  auto put_row = [&](int r, const SparseRow& row) {
    for (const auto& [i, a] : row.terms) {
      T(r, pos_col[i]) += a;
      if (neg_col[i] >= 0) T(r, neg_col[i]) -= a;
    }
    T(r, total) = row.rhs;
  };
  int r = 0;
  for (const auto& row : sys.equalities) put_row(r++, row);
  for (std::size_t k = 0; k < ge.size(); ++k) {
    put_row(r, *ge[k]);
    T(r, slack0 + static_cast<int>(k)) = -1.0;
    ++r;
  }
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    if (T(i, total) < 0) T.row(i) *= -1.0;
    T(i, art0 + i) = 1.0;
    basis[i] = art0 + i;
  }
  // Phase one objective: sum of artificials, expressed in reduced form.
  for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);
  for (int i = 0; i < m; ++i) T(m, art0 + i) = 0.0;

  Tableau tab(std::move(T), std::move(basis));
  const int max_iter = 50 * (total + m + 10);
  Solution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  std::vector<char> allowed(total, 1);
  bool out_of_iter = false;
  tab.optimize(allowed, 1e-11, max_iter, out_of_iter);
  double rhs_scale = 1.0;
  for (int i = 0; i < m; ++i) rhs_scale = std::max(rhs_scale, std::abs(tab.data()(i, total)));
  if (-tab.data()(tab.rows(), total) > std::max(tol, 1e-9) * rhs_scale) {
    sol.status = out_of_iter ? SolveStatus::max_iter : SolveStatus::infeasible;
    sol.objective = std::numeric_limits<double>::infinity();
    return sol;
  }
  // Drive artificials out of the basis; rows where that is impossible are redundant.
  for (int i = tab.rows() - 1; i >= 0; --i) {
    if (tab.basis()[i] < art0) continue;
    int col = -1;
    for (int j = 0; j < art0; ++j)
      if (std::abs(tab.data()(i, j)) > 1e-7) {
        col = j;
        break;
      }
    if (col >= 0) tab.pivot(i, col);
    else tab.remove_row(i);
  }
  for (int j = art0; j < total; ++j) allowed[j] = 0;

  // Phase two objective row.
  auto& D = tab.data();
  const int mm = tab.rows();
  D.row(mm).setZero();
  for (int i = 0; i < n; ++i) {
    D(mm, pos_col[i]) = prog.objective[i];
    if (neg_col[i] >= 0) D(mm, neg_col[i]) = -prog.objective[i];
  }
  for (int i = 0; i < mm; ++i) {
    const double cb = D(mm, tab.basis()[i]);
    if (cb != 0.0) D.row(mm) -= cb * D.row(i);
  }
  const bool bounded = tab.optimize(allowed, 1e-11, max_iter, out_of_iter);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(total);
  for (int i = 0; i < mm; ++i) z[tab.basis()[i]] = D(i, total);
  for (int i = 0; i < n; ++i) sol.x[i] = z[pos_col[i]] - (neg_col[i] >= 0 ? z[neg_col[i]] : 0.0);
  sol.objective = prog.objective.dot(sol.x);
  sol.primal_residual = max_violation(prog, sol.x);
  sol.iterations = 0;
  if (!bounded) {
    sol.status = SolveStatus::unbounded;
    sol.objective = -std::numeric_limits<double>::infinity();
  } else if (out_of_iter) {
    sol.status = SolveStatus::max_iter;
  } else {
    sol.status = SolveStatus::optimal;
  }
  return sol;
}

}  // namespace dualstruct
