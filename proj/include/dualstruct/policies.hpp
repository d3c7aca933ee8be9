#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dualstruct/core.hpp"
#include "dualstruct/infodual.hpp"
#include "dualstruct/lowerbound.hpp"
#include "dualstruct/structures.hpp"

namespace dualstruct {

enum class Phase { init, exploit, explore_least, explore_rate, explore_optimal };
std::string to_string(Phase p);

struct DusaConfig {
  double eps = 1e-3;
  double T0 = 2000.0;
  bool strict = false;  // exact projections of the shallow and deep updates
};

struct DusaState {
  StructureSpec spec;
  ObservationLog log;
  std::vector<DualVars> mu;  // per arm
  RateVector eta_ref;
  DusaConfig config;
  long s = 0;  // exploration rounds so far
  Phase phase = Phase::init;
  long solver_failures = 0;
};

struct PolicyDecision {
  int arm = 0;
  Phase phase = Phase::init;
  std::vector<double> tests;  // dual-test value per arm (NaN where not evaluated)
  double threshold = 0.0;
  RateVector eta;             // shallow-update rates when computed
  bool solver_failure = false;
};

DusaState dusa_init(const StructureSpec& spec, const DusaConfig& config);

struct InfoTest {
  bool pass = true;
  std::vector<double> values;
  double threshold = 0.0;
};
InfoTest sufficient_info_test(const DusaState& state, long t);

// Chooses the arm for round t (1-based). The caller records the observed reward in state.log.
PolicyDecision dusa_step(DusaState& state, long t);

struct ShallowResult {
  RateVector eta;       // all +inf when infeasible
  bool infeasible = false;
  SolveStatus status = SolveStatus::optimal;
  double value = 0.0;   // sum eta * gap
};
ShallowResult shallow_update(const StructureSpec& spec, const RewardMatrix& P, const RateVector& eta_ref,
                             const std::vector<DualVars>& mu, double eps, bool strict = false);

struct DeepResult {
  RateVector eta;
  std::vector<DualVars> mu;
  SolveStatus status = SolveStatus::optimal;
  double value = 0.0;
  bool ok() const { return status == SolveStatus::optimal; }
};
DeepResult deep_update(const StructureSpec& spec, const RewardMatrix& P, double eps, bool strict = false);

// Arm choices used by the baselines. Ties go to the lowest index.
int least_pulled(const ObservationLog& log);
int least_pulled_best(const ObservationLog& log);
double klucb_index(double mean, long n, double level);
int klucb_step(const ObservationLog& log, long t);
int ucb1_step(const ObservationLog& log, long t);

struct OssbState {
  double L = 0.0;
  Eigen::MatrixXd distance;
  double gamma = 0.0;
  double eps = 0.0;
  long s = 0;
  Phase phase = Phase::init;
};
int ossb_lipschitz_step(const ObservationLog& log, long t, OssbState& state);

// A bandit policy driven by the simulator: select an arm, then observe its reward level.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual int select(long t) = 0;
  virtual void observe(int arm, int level) = 0;
  virtual Phase phase() const { return Phase::exploit; }
  virtual long explorations() const { return 0; }
};

struct PolicySpec {
  std::string kind;  // dusa, klucb, ucb1, ossb, oracle
  DusaConfig dusa;
  double ossb_gamma = 0.0;
  double ossb_eps = 0.0;
};

// The oracle policy needs the true model; other policies ignore it.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const StructureSpec& structure, const RewardMatrix& truth);

}  // namespace dualstruct
