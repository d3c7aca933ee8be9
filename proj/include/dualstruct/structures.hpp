#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dualstruct/core.hpp"
#include "dualstruct/linear_system.hpp"

namespace dualstruct {

enum class StructureKind { separable, lipschitz, linear, dispersion };
std::string to_string(StructureKind k);
StructureKind structure_kind_from_string(const std::string& s);

// coeffs . q >= rhs on a probability column q.
struct ArmConstraint {
  std::vector<double> coeffs;
  double rhs = 0.0;
};

struct StructureSpec {
  StructureKind kind = StructureKind::separable;
  RewardSupport support = RewardSupport::bernoulli();
  int arms = 0;

  // lipschitz
  double lipschitz = 0.0;
  Eigen::MatrixXd distance;
  std::vector<double> positions;
  // linear: one feature row per arm
  Eigen::MatrixXd features;
  // dispersion: E[r^2] <= gamma(x) E[r]
  std::vector<double> dispersion;
  // separable: optional per-arm constraints
  std::vector<std::vector<ArmConstraint>> arm_constraints;

  void validate() const;
  int levels() const { return static_cast<int>(support.size()); }

  static StructureSpec separable(RewardSupport support, int arms, std::vector<std::vector<ArmConstraint>> cons = {});
  static StructureSpec lipschitz_line(std::vector<double> positions, double L);
  static StructureSpec lipschitz_metric(Eigen::MatrixXd d, double L);
  static StructureSpec linear(RewardSupport support, Eigen::MatrixXd features);
  static StructureSpec dispersion_bound(RewardSupport support, std::vector<double> gamma);
};

// A polyhedral cone over (base, aux) variables. Base variables are the |R||X| entries
// of Q (primal) or lambda (dual), indexed r + |R| * x.
struct ConeDescription {
  int levels = 0;
  int arms = 0;
  int aux_count = 0;
  LinearSystem system;

  // Primal cones: index of the mass variable theta (total mass of every column).
  int mass_index = -1;

  // Dual cones: lambda(r,x) >= lambda_floor[r + |R| x] . aux, with aux constrained by
  // aux_system (indices relative to the aux block).
  std::vector<Terms> lambda_floor;
  LinearSystem aux_system;

  int base_count() const { return levels * arms; }
  int base_index(int r, int x) const { return r + levels * x; }
  int variable_count() const { return base_count() + aux_count; }
};

ConeDescription primal_cone(const StructureSpec& spec);
ConeDescription dual_cone(const StructureSpec& spec);

// Ordered arm pairs that carry a Lipschitz slope constraint after dropping pairs
// implied by the triangle inequality through a third arm.
std::vector<std::pair<int, int>> lipschitz_pairs(const StructureSpec& spec);

// Membership of base values in the cone's projection (LP feasibility over aux).
bool cone_contains(const ConeDescription& cone, const Eigen::VectorXd& base, double tol = 1e-9);

// Linear system over the primal cone variables describing the model at unit mass.
LinearSystem model_system(const StructureSpec& spec);
bool is_feasible(const StructureSpec& spec, const RewardMatrix& P, double tol = 1e-8);

Eigen::VectorXd flatten(const RewardMatrix& P);
RewardMatrix unflatten(const RewardSupport& support, int arms, const Eigen::VectorXd& v);

// Largest mean of arm x' over models agreeing with P on the optimal arms, by LP.
// nullopt when no such model exists.
std::optional<double> rew_max_lp(const StructureSpec& spec, const RewardMatrix& P, int x);
// Same value, with closed forms where the structure admits one. Throws when infeasible.
double rew_max(const StructureSpec& spec, const RewardMatrix& P, int x);

struct ArmClasses {
  std::vector<int> optimal;
  std::vector<int> deceitful;
  std::vector<int> non_deceitful;
  std::vector<double> rew_max;  // per arm; -inf for optimal arms
  bool model_infeasible = false;
  bool is_deceitful(int x) const;
};

inline constexpr double kDeceitTolerance = 1e-7;
ArmClasses classify_arms(const StructureSpec& spec, const RewardMatrix& P);

// Closest model to Q in l1 distance.
RewardMatrix project_l1(const StructureSpec& spec, const RewardMatrix& Q);

// Random member of the model: a convex combination of LP vertices for random objectives.
RewardMatrix sample_model_member(const StructureSpec& spec, std::mt19937_64& rng, int vertices = 4);

// Random dual-cone member: returns (lambda flattened, aux).
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_dual_member(const StructureSpec& spec, std::mt19937_64& rng);

}  // namespace dualstruct
