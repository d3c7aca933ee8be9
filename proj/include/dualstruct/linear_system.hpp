#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dualstruct {

// Sparse coefficient list; duplicate indices are summed when evaluated.
using Terms = std::vector<std::pair<int, double>>;

struct SparseRow {
  Terms terms;
  double rhs = 0.0;

  double dot(const Eigen::VectorXd& v) const {
    double s = 0.0;
    for (const auto& [i, a] : terms) s += a * v[i];
    return s;
  }
};

// Equality rows (a.v = rhs) and inequality rows (a.v >= rhs) over variable_count unknowns.
struct LinearSystem {
  int variable_count = 0;
  std::vector<SparseRow> equalities;
  std::vector<SparseRow> inequalities;

  int add_variables(int k) {
    const int first = variable_count;
    variable_count += k;
    return first;
  }
  void add_eq(Terms t, double rhs) { equalities.push_back({std::move(t), rhs}); }
  void add_ge(Terms t, double rhs) { inequalities.push_back({std::move(t), rhs}); }

  // Largest violation of any row at v (0 when feasible).
  double violation(const Eigen::VectorXd& v) const {
    double worst = 0.0;
    for (const auto& row : equalities) worst = std::max(worst, std::abs(row.dot(v) - row.rhs));
    for (const auto& row : inequalities) worst = std::max(worst, row.rhs - row.dot(v));
    return worst;
  }

  // Copy with every variable index shifted by offset inside a larger space of size total.
  LinearSystem embedded(int offset, int total) const {
    LinearSystem out;
    out.variable_count = total;
    auto shift = [offset](const SparseRow& row) {
      SparseRow r = row;
      for (auto& t : r.terms) t.first += offset;
      return r;
    };
    for (const auto& row : equalities) out.equalities.push_back(shift(row));
    for (const auto& row : inequalities) out.inequalities.push_back(shift(row));
    return out;
  }

  void append(const LinearSystem& other) {
    equalities.insert(equalities.end(), other.equalities.begin(), other.equalities.end());
    inequalities.insert(inequalities.end(), other.inequalities.begin(), other.inequalities.end());
  }
};

}  // namespace dualstruct
