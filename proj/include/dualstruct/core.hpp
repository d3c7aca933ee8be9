#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dualstruct {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Sorted, distinct reward levels shared by every arm.
class RewardSupport {
 public:
  RewardSupport() = default;
  explicit RewardSupport(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  double max() const { return values_.back(); }
  double min() const { return values_.front(); }

  // Index of a level, or throws if the value is not on the grid.
  std::size_t index_of(double r, double tol = 1e-12) const;

  static RewardSupport bernoulli() { return RewardSupport({0.0, 1.0}); }
  static RewardSupport uniform_grid(int levels);

 private:
  std::vector<double> values_;
};

// P(r, x): one column per arm, each column a probability vector over the support.
class RewardMatrix {
 public:
  RewardMatrix() = default;
  RewardMatrix(RewardSupport support, int arms);
  RewardMatrix(RewardSupport support, Eigen::MatrixXd probs);

  static RewardMatrix bernoulli(const std::vector<double>& means);

  int arms() const { return static_cast<int>(probs_.cols()); }
  int levels() const { return static_cast<int>(probs_.rows()); }
  const RewardSupport& support() const { return support_; }
  const Eigen::MatrixXd& probs() const { return probs_; }
  Eigen::MatrixXd& probs() { return probs_; }
  double operator()(int r, int x) const { return probs_(r, x); }
  double& operator()(int r, int x) { return probs_(r, x); }

  // Throws unless every entry is nonnegative and each column sums to one.
  void validate(double tol = 1e-12) const;

 private:
  RewardSupport support_;
  Eigen::MatrixXd probs_;
};

double mean_reward(const RewardMatrix& P, int x);
Eigen::VectorXd mean_rewards(const RewardMatrix& P);

struct BestArm {
  int arm;
  double value;
};
BestArm best_arm_and_value(const RewardMatrix& P);

double gap(const RewardMatrix& P, int x);

// Arms whose mean is within tol of the best mean, in index order.
std::vector<int> optimal_arms(const RewardMatrix& P, double tol = 1e-12);

double pseudo_regret(const RewardMatrix& P, const std::vector<int>& pulls);

// Counts and running empirical distribution of a single run.
class ObservationLog {
 public:
  ObservationLog(RewardSupport support, int arms);

  void record(int arm, double reward);
  void record_level(int arm, int level);

  int arms() const { return static_cast<int>(counts_.size()); }
  long count(int x) const { return counts_[x]; }
  const std::vector<long>& counts() const { return counts_; }
  const RewardMatrix& empirical() const { return empirical_; }
  long total() const { return total_; }
  long explorations() const { return explorations_; }
  void add_exploration() { ++explorations_; }

 private:
  std::vector<long> counts_;
  RewardMatrix empirical_;
  long total_ = 0;
  long explorations_ = 0;
  long since_renormalize_ = 0;
};

}  // namespace dualstruct
