#include "dualstruct/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dualstruct {

RewardSupport::RewardSupport(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw std::invalid_argument("reward support needs at least two levels");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0))
      throw std::invalid_argument("reward levels must lie in [0,1]");
    if (i > 0 && !(values_[i] > values_[i - 1]))
      throw std::invalid_argument("reward levels must be strictly increasing");
  }
}

RewardSupport RewardSupport::uniform_grid(int levels) {
  std::vector<double> v(levels);
  for (int i = 0; i < levels; ++i) v[i] = static_cast<double>(i) / (levels - 1);
  return RewardSupport(std::move(v));
}

std::size_t RewardSupport::index_of(double r, double tol) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), r - tol);
  if (it == values_.end() || std::abs(*it - r) > tol)
    throw std::invalid_argument("reward " + std::to_string(r) + " is not on the support grid");
  return static_cast<std::size_t>(it - values_.begin());
}

RewardMatrix::RewardMatrix(RewardSupport support, int arms)
    : support_(std::move(support)),
      probs_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(support_.size()), arms)) {
  if (arms < 1) throw std::invalid_argument("need at least one arm");
}

RewardMatrix::RewardMatrix(RewardSupport support, Eigen::MatrixXd probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (probs_.rows() != static_cast<Eigen::Index>(support_.size()))
    throw std::invalid_argument("row count must match the support size");
  if (probs_.cols() < 1) throw std::invalid_argument("need at least one arm");
}

RewardMatrix RewardMatrix::bernoulli(const std::vector<double>& means) {
  RewardMatrix P(RewardSupport::bernoulli(), static_cast<int>(means.size()));
  for (int x = 0; x < P.arms(); ++x) {
    P(0, x) = 1.0 - means[x];
    P(1, x) = means[x];
  }
  return P;
}

void RewardMatrix::validate(double tol) const {
  for (int x = 0; x < arms(); ++x) {
    double s = 0.0;
    for (int r = 0; r < levels(); ++r) {
      if (!(probs_(r, x) >= 0.0) || !std::isfinite(probs_(r, x)))
        throw std::invalid_argument("reward probabilities must be finite and nonnegative");
      s += probs_(r, x);
    }
    if (std::abs(s - 1.0) > tol) throw std::invalid_argument("reward column does not sum to one");
  }
}

double mean_reward(const RewardMatrix& P, int x) {
  double m = 0.0;
  for (int r = 0; r < P.levels(); ++r) m += P.support()[r] * P(r, x);
  return m;
}

Eigen::VectorXd mean_rewards(const RewardMatrix& P) {
  Eigen::VectorXd m(P.arms());
  for (int x = 0; x < P.arms(); ++x) m[x] = mean_reward(P, x);
  return m;
}

BestArm best_arm_and_value(const RewardMatrix& P) {
  BestArm best{0, mean_reward(P, 0)};
  for (int x = 1; x < P.arms(); ++x) {
    const double m = mean_reward(P, x);
    if (m > best.value) best = {x, m};
  }
  return best;
}

double gap(const RewardMatrix& P, int x) {
  return std::max(0.0, best_arm_and_value(P).value - mean_reward(P, x));
}

std::vector<int> optimal_arms(const RewardMatrix& P, double tol) {
  const double best = best_arm_and_value(P).value;
  std::vector<int> out;
  for (int x = 0; x < P.arms(); ++x)
    if (mean_reward(P, x) >= best - tol) out.push_back(x);
  return out;
}

double pseudo_regret(const RewardMatrix& P, const std::vector<int>& pulls) {
  const Eigen::VectorXd m = mean_rewards(P);
  const double best = m.maxCoeff();
  double total = 0.0;
  for (int x : pulls) {
    if (x < 0 || x >= P.arms()) throw std::out_of_range("arm index");
    total += best - m[x];
  }
  return total;
}

ObservationLog::ObservationLog(RewardSupport support, int arms)
    : counts_(arms, 0), empirical_(std::move(support), arms) {}

void ObservationLog::record(int arm, double reward) {
  record_level(arm, static_cast<int>(empirical_.support().index_of(reward)));
}

void ObservationLog::record_level(int arm, int level) {
  if (arm < 0 || arm >= arms()) throw std::out_of_range("arm index");
  if (level < 0 || level >= empirical_.levels()) throw std::out_of_range("reward level");
  const double n = static_cast<double>(counts_[arm]);
  auto col = empirical_.probs().col(arm);
  for (int r = 0; r < empirical_.levels(); ++r) col[r] = n * col[r] / (n + 1.0);
  col[level] += 1.0 / (n + 1.0);
  ++counts_[arm];
  ++total_;
  if (++since_renormalize_ >= 10000) {
    since_renormalize_ = 0;
    for (int x = 0; x < arms(); ++x) {
      const double s = empirical_.probs().col(x).sum();
      if (s > 0.0) empirical_.probs().col(x) /= s;
    }
  }
}

}  // namespace dualstruct
