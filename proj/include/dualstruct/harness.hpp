#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dualstruct/core.hpp"
#include "dualstruct/policies.hpp"
#include "dualstruct/structures.hpp"

namespace dualstruct {

// SplitMix64 finalizer, used as a keyed hash.
std::uint64_t splitmix64(std::uint64_t x);

// Key for the draws of one (instance, seed, policy) run at round t. Every stream is a pure
// function of its coordinates, so runs can execute in any order or in parallel.
std::uint64_t stream_key(std::uint64_t instance, std::uint64_t seed, std::uint64_t policy, std::uint64_t t);

// Uniform on [0, 1) from the top 53 bits.
inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Counter-mode generator over a fixed key; satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }
  double uniform() { return unit_uniform((*this)()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct Instance {
  std::string id;
  StructureSpec spec;
  RewardMatrix truth;
};

Instance gen_linear_instance(std::uint64_t seed);
Instance gen_lipschitz_instance(std::uint64_t seed);
Instance gen_dispersion_instance(std::uint64_t seed);
Instance generate_instance(StructureKind kind, std::uint64_t seed);

// Level index drawn from a probability column by inversion.
int draw_level(const RewardMatrix& P, int arm, double u);

struct NormalizedRegret {
  double value = 0.0;
  bool raw = false;  // C(P) vanished; value is the unnormalized regret
};
NormalizedRegret normalized_regret(double regret, double C, long T);

struct ExperimentConfig {
  StructureKind kind = StructureKind::lipschitz;
  std::vector<std::uint64_t> instance_seeds{1};
  std::vector<Instance> explicit_instances;  // used instead of generated ones when present
  long horizon = 10000;
  std::vector<std::uint64_t> seeds{1};
  std::vector<PolicySpec> policies;
  long stride = 100;
  int threads = 1;
  double lower_bound_eps = 1e-3;
  std::string output;

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::vector<Instance> instances() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct RunRecord {
  std::string instance_id;
  std::uint64_t seed = 0;
  std::string policy;
  long t = 0;
  double cum_regret = 0.0;
  double normalized_regret = 0.0;
  long s_t = 0;
  std::string phase;
  double round_time_us = 0.0;
};

struct RunResult {
  std::string instance_id;
  std::uint64_t seed = 0;
  std::string policy;
  double lower_bound = 0.0;  // C(P) of the true instance
  bool raw_normalization = false;
  std::vector<RunRecord> records;  // thinned
  std::vector<Phase> phases;       // every round
  std::vector<float> round_us;     // every round
  std::string error;               // empty on success
  const RunRecord* at(long t) const;
  const RunRecord& last() const { return records.back(); }
};

// Simulates one run of T rounds. Policy errors are caught and reported in the result.
RunResult run_single(const Instance& inst, std::uint64_t instance_index, double lower_bound, const PolicySpec& policy,
                     std::uint64_t policy_index, std::uint64_t seed, long horizon, long stride);

// Runs every (instance, seed, policy) triple. Results come back in job order regardless of
// the thread count; on_done is called in that same order as results become available.
std::vector<RunResult> run_experiment(const ExperimentConfig& config,
                                      const std::function<void(const RunResult&)>& on_done = {});

inline constexpr const char* kCsvHeader =
    "instance_id,seed,policy,t,cum_regret,normalized_regret,s_t,phase,round_time_us";
void write_csv_rows(std::ostream& os, const RunResult& run);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};
struct ValidationReport {
  std::string suite;
  std::vector<Check> checks;
  bool passed() const;
};

// Suites: duality, cones, decomposition, lowerbound, concentration.
ValidationReport validate_suite(const std::string& suite, std::uint64_t seed = 1);
std::vector<std::string> suite_names();

// Monte Carlo frequency of sum_x N_t(x) I(P_t(x), P(x)) >= delta for uniformly random
// pulls of a Bernoulli bandit, one entry per delta.
std::vector<double> concentration_frequency(const std::vector<double>& means, long t, const std::vector<double>& deltas,
                                            int trials, std::uint64_t seed);

}  // namespace dualstruct
