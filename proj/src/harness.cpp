#include "dualstruct/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dualstruct/lowerbound.hpp"

namespace dualstruct {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t instance, std::uint64_t seed, std::uint64_t policy, std::uint64_t t) {
  std::uint64_t k = splitmix64(instance ^ 0x6a09e667f3bcc908ULL);
  k = splitmix64(k ^ seed);
  k = splitmix64(k ^ (policy + 0x3c6ef372fe94f82bULL));
  return splitmix64(k ^ t);
}

namespace {

// Instance generators use their own key space so they never collide with reward streams.
CounterRng generator_rng(std::uint64_t tag, std::uint64_t seed) { return CounterRng(splitmix64(tag) ^ splitmix64(~seed)); }

}  // namespace

Instance gen_linear_instance(std::uint64_t seed) {
  constexpr int arms = 10, dim = 5;
  for (std::uint64_t s = seed;; ++s) {
    CounterRng rng = generator_rng(1, s);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd F(arms, dim);
    for (int x = 0; x < arms; ++x) {
      for (int k = 0; k < dim - 1; ++k) F(x, k) = N(rng);
      F(x, dim - 1) = 1.0;
    }
    Eigen::VectorXd theta(dim);
    for (int k = 0; k < dim; ++k) theta[k] = N(rng);
    const Eigen::VectorXd raw = F * theta;
    const double lo = raw.minCoeff(), hi = raw.maxCoeff();
    if (!(hi - lo > 1e-9)) continue;
    // Scale and shift theta; the constant feature absorbs the shift.
    const double a = 0.8 / (hi - lo);
    const double b = 0.1 - a * lo;
    theta *= a;
    theta[dim - 1] += b;
    std::vector<double> means(arms);
    for (int x = 0; x < arms; ++x) means[x] = a * raw[x] + b;
    return {"linear-" + std::to_string(seed), StructureSpec::linear(RewardSupport::bernoulli(), F),
            RewardMatrix::bernoulli(means)};
  }
}

Instance gen_lipschitz_instance(std::uint64_t seed) {
  constexpr int arms = 10;
  CounterRng rng = generator_rng(2, seed);
  std::vector<double> pos(arms), means(arms);
  for (int x = 0; x < arms; ++x) {
    pos[x] = rng.uniform();
    means[x] = 0.8 - 0.5 * std::abs(0.5 - pos[x]);
  }
  return {"lipschitz-" + std::to_string(seed), StructureSpec::lipschitz_line(pos, 0.5), RewardMatrix::bernoulli(means)};
}

Instance gen_dispersion_instance(std::uint64_t seed) {
  constexpr int arms = 10, levels = 11;
  CounterRng rng = generator_rng(3, seed);
  const RewardSupport sup = RewardSupport::uniform_grid(levels);
  std::vector<double> gamma(arms);
  for (int x = 0; x < arms; ++x) gamma[x] = 1.0 / levels + 0.2 * rng.uniform();
  Eigen::MatrixXd Q(levels, arms);
  for (int x = 0; x < arms; ++x) {
    std::vector<double> cut(levels + 1);
    cut[0] = 0.0;
    cut[levels] = 1.0;
    for (int k = 1; k < levels; ++k) cut[k] = rng.uniform();
    std::sort(cut.begin() + 1, cut.end() - 1);
    for (int r = 0; r < levels; ++r) Q(r, x) = cut[r + 1] - cut[r];
  }
  const StructureSpec spec = StructureSpec::dispersion_bound(sup, gamma);
  RewardMatrix P = project_l1(spec, RewardMatrix(sup, Q));
  return {"dispersion-" + std::to_string(seed), spec, P};
}

Instance generate_instance(StructureKind kind, std::uint64_t seed) {
  switch (kind) {
    case StructureKind::linear: return gen_linear_instance(seed);
    case StructureKind::lipschitz: return gen_lipschitz_instance(seed);
    case StructureKind::dispersion: return gen_dispersion_instance(seed);
    case StructureKind::separable: break;
  }
  throw std::invalid_argument("no generator for separable instances; give them explicitly");
}

int draw_level(const RewardMatrix& P, int arm, double u) {
  double acc = 0.0;
  const int R = P.levels();
  for (int r = 0; r < R - 1; ++r) {
    acc += P(r, arm);
    if (u < acc) return r;
  }
  // Skip trailing zero-probability levels that rounding could otherwise reach.
  int last = R - 1;
  while (last > 0 && P(last, arm) <= 0.0) --last;
  return last;
}

NormalizedRegret normalized_regret(double regret, double C, long T) {
  if (C < 0.0) throw std::invalid_argument("lower bound must be nonnegative");
  if (C <= 1e-9 || T < 2) return {regret, true};
  return {regret / (C * std::log(static_cast<double>(T))), false};
}

// ---------------------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  const auto insts = explicit_instances.empty() ? instance_seeds.size() : explicit_instances.size();
  if (insts == 0) throw std::invalid_argument("no instances configured");
  if (seeds.empty()) throw std::invalid_argument("no seeds configured");
  if (policies.empty()) throw std::invalid_argument("no policies configured");
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  if (!(lower_bound_eps > 0.0)) throw std::invalid_argument("lower_bound_eps must be positive");
  auto sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw std::invalid_argument("seeds must be distinct");
  for (const auto& inst : instances())
    if (horizon < inst.spec.arms + 1) throw std::invalid_argument("horizon must exceed the arm count");
}

std::vector<Instance> ExperimentConfig::instances() const {
  if (!explicit_instances.empty()) return explicit_instances;
  std::vector<Instance> out;
  for (auto s : instance_seeds) out.push_back(generate_instance(kind, s));
  return out;
}

namespace {

using nlohmann::json;

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

Eigen::MatrixXd matrix_rows(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw std::invalid_argument("empty matrix");
  Eigen::MatrixXd M(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw std::invalid_argument("ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) M(i, k) = rows[i][k];
  }
  return M;
}

RewardSupport support_from(const json& j) {
  if (!j.contains("support")) return RewardSupport::bernoulli();
  const auto& s = j.at("support");
  if (s.is_number_integer()) return RewardSupport::uniform_grid(s.get<int>());
  return RewardSupport(doubles(s));
}

// {"kind": ..., "means": [...]} or {"kind": ..., "probs": [[column of arm 0], ...]}.
Instance explicit_instance(const json& j, StructureKind kind, std::size_t index) {
  const RewardSupport sup = support_from(j);
  RewardMatrix P;
  if (j.contains("means")) {
    if (sup.size() != 2) throw std::invalid_argument("means need a two-level support; give probs instead");
    std::vector<double> m = doubles(j.at("means"));
    Eigen::MatrixXd M(2, m.size());
    for (std::size_t x = 0; x < m.size(); ++x) {
      const double p = (m[x] - sup[0]) / (sup[1] - sup[0]);
      M(0, x) = 1.0 - p;
      M(1, x) = p;
    }
    P = RewardMatrix(sup, M);
  } else {
    P = RewardMatrix(sup, matrix_rows(j.at("probs")).transpose());
  }
  P.validate(1e-9);
  const int X = P.arms();
  StructureSpec spec;
  switch (kind) {
    case StructureKind::separable: spec = StructureSpec::separable(sup, X); break;
    case StructureKind::lipschitz: {
      const double L = j.at("L").get<double>();
      if (j.contains("positions")) spec = StructureSpec::lipschitz_line(doubles(j.at("positions")), L);
      else spec = StructureSpec::lipschitz_metric(matrix_rows(j.at("distance")), L);
      spec.support = sup;
      break;
    }
    case StructureKind::linear: spec = StructureSpec::linear(sup, matrix_rows(j.at("features"))); break;
    case StructureKind::dispersion: spec = StructureSpec::dispersion_bound(sup, doubles(j.at("gamma"))); break;
  }
  if (spec.arms != X) throw std::invalid_argument("instance structure and reward matrix disagree on the arm count");
  spec.validate();
  const std::string id = j.value("id", to_string(kind) + "-explicit-" + std::to_string(index));
  return {id, spec, P};
}

PolicySpec policy_from(const json& j) {
  PolicySpec p;
  if (j.is_string()) {
    p.kind = j.get<std::string>();
    return p;
  }
  p.kind = j.at("kind").get<std::string>();
  p.dusa.eps = j.value("eps", p.dusa.eps);
  p.dusa.T0 = j.value("T0", p.dusa.T0);
  p.dusa.strict = j.value("strict", p.dusa.strict);
  p.ossb_gamma = j.value("gamma", p.ossb_gamma);
  if (p.kind == "ossb" || p.kind == "ossb-style") p.ossb_eps = j.value("eps", p.ossb_eps);
  return p;
}

std::vector<std::uint64_t> seed_list(const json& j) {
  if (j.is_object()) {
    const auto first = j.at("first").get<std::uint64_t>();
    const auto count = j.at("count").get<std::uint64_t>();
    std::vector<std::uint64_t> out(count);
    std::iota(out.begin(), out.end(), first);
    return out;
  }
  return j.get<std::vector<std::uint64_t>>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.kind = structure_kind_from_string(j.at("structure").get<std::string>());
    if (j.contains("instances")) {
      const auto& inst = j.at("instances");
      if (inst.is_array()) {
        for (std::size_t i = 0; i < inst.size(); ++i) c.explicit_instances.push_back(explicit_instance(inst[i], c.kind, i));
      } else {
        c.instance_seeds = seed_list(inst.at("seeds"));
      }
    }
    c.horizon = j.value("horizon", c.horizon);
    if (j.contains("seeds")) c.seeds = seed_list(j.at("seeds"));
    for (const auto& p : j.at("policies")) c.policies.push_back(policy_from(p));
    c.stride = j.value("stride", c.stride);
    c.threads = j.value("threads", c.threads);
    c.lower_bound_eps = j.value("lower_bound_eps", c.lower_bound_eps);
    c.output = j.value("output", c.output);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------------------
// Simulation

const RunRecord* RunResult::at(long t) const {
  auto it = std::lower_bound(records.begin(), records.end(), t, [](const RunRecord& r, long v) { return r.t < v; });
  return it != records.end() && it->t == t ? &*it : nullptr;
}

RunResult run_single(const Instance& inst, std::uint64_t instance_index, double lower_bound, const PolicySpec& pspec,
                     std::uint64_t policy_index, std::uint64_t seed, long horizon, long stride) {
  using clock = std::chrono::steady_clock;
  RunResult out;
  out.instance_id = inst.id;
  out.seed = seed;
  out.policy = pspec.kind;
  out.lower_bound = lower_bound;
  out.raw_normalization = normalized_regret(0.0, lower_bound, horizon).raw;
  const Eigen::VectorXd means = mean_rewards(inst.truth);
  const double best = means.maxCoeff();
  double regret = 0.0;
  long t = 0;
  std::unique_ptr<Policy> policy;
  auto record = [&](const std::string& phase, double us) {
    RunRecord r;
    r.instance_id = inst.id;
    r.seed = seed;
    r.policy = out.policy;
    r.t = t;
    r.cum_regret = regret;
    r.normalized_regret = normalized_regret(regret, lower_bound, std::max(t, 2L)).value;
    r.s_t = policy ? policy->explorations() : 0;
    r.phase = phase;
    r.round_time_us = us;
    out.records.push_back(std::move(r));
  };
  try {
    policy = make_policy(pspec, inst.spec, inst.truth);
    out.policy = policy->name();
    out.phases.reserve(horizon);
    out.round_us.reserve(horizon);
    for (t = 1; t <= horizon; ++t) {
      const auto start = clock::now();
      const int arm = policy->select(t);
      const double us = std::chrono::duration<double, std::micro>(clock::now() - start).count();
      if (arm < 0 || arm >= inst.truth.arms()) throw std::runtime_error("policy chose an invalid arm");
      const int level = draw_level(inst.truth, arm, unit_uniform(stream_key(instance_index, seed, policy_index, t)));
      policy->observe(arm, level);
      regret += best - means[arm];
      out.phases.push_back(policy->phase());
      out.round_us.push_back(static_cast<float>(us));
      if (t % stride == 0 || t == horizon) record(to_string(policy->phase()), us);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    record("error", 0.0);
  }
  return out;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config, const std::function<void(const RunResult&)>& on_done) {
  config.validate();
  const auto insts = config.instances();
  std::vector<double> bounds;
  for (const auto& inst : insts) {
    const auto lb = lower_bound_dual(inst.spec, inst.truth, config.lower_bound_eps);
    if (!lb.ok()) throw std::runtime_error("lower bound solve failed on instance " + inst.id);
    bounds.push_back(lb.value);
  }
  struct Job {
    std::size_t inst, policy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < insts.size(); ++i)
    for (auto s : config.seeds)
      for (std::size_t p = 0; p < config.policies.size(); ++p) jobs.push_back({i, p, s});

  std::vector<RunResult> results(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      const Job& jb = jobs[k];
      RunResult r = run_single(insts[jb.inst], jb.inst, bounds[jb.inst], config.policies[jb.policy], jb.policy, jb.seed,
                               config.horizon, config.stride);
      std::lock_guard<std::mutex> lock(mu);
      results[k] = std::move(r);
      done[k] = 1;
      cv.notify_all();
    }
  };
  const int nthreads = std::min<int>(config.threads, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  // Hand results to the callback strictly in job order so the output bytes do not depend
  // on scheduling.
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[k] != 0; });
    lock.unlock();
    if (on_done) on_done(results[k]);
  }
  for (auto& th : pool) th.join();
  return results;
}

void write_csv_rows(std::ostream& os, const RunResult& run) {
  char buf[64];
  for (const auto& r : run.records) {
    os << r.instance_id << ',' << r.seed << ',' << r.policy << ',' << r.t << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.cum_regret);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.normalized_regret);
    os << buf << ',' << r.s_t << ',' << r.phase << ',';
    std::snprintf(buf, sizeof buf, "%.1f", r.round_time_us);
    os << buf << '\n';
  }
}

}  // namespace dualstruct
