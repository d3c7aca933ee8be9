#pragma once
// Reference computations used only by the tests. They are written independently of
// the library code they check.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Brute-force LP: min c.x s.t. A_eq x = b_eq, G x >= h, by enumerating every basic
// solution. Only for a handful of variables. Returns +inf if nothing is feasible.
inline double vertex_enumeration(const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                                 const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  const int n = static_cast<int>(c.size());
  const int me = static_cast<int>(Aeq.rows());
  const int mi = static_cast<int>(G.rows());
  const int pick = n - me;
  double best = std::numeric_limits<double>::infinity();
  if (pick < 0) return best;
  std::vector<int> idx(pick);
  std::vector<bool> mask(mi, false);
  std::fill(mask.begin(), mask.begin() + std::min(pick, mi), true);
  if (pick > mi) return best;
  do {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs(n);
    M.topRows(me) = Aeq;
    rhs.head(me) = beq;
    int k = me;
    for (int i = 0; i < mi; ++i)
      if (mask[i]) {
        M.row(k) = G.row(i);
        rhs[k] = h[i];
        ++k;
      }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() < n) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    bool ok = me == 0 || (Aeq * x - beq).cwiseAbs().maxCoeff() < 1e-7;
    for (int i = 0; i < mi && ok; ++i)
      if (G.row(i).dot(x) < h[i] - 1e-7) ok = false;
    if (ok) best = std::min(best, c.dot(x));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace oracle
