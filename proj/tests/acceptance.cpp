// Acceptance checks, one PASS/FAIL line each. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dualstruct/conic.hpp"
#include "dualstruct/harness.hpp"
#include "dualstruct/lowerbound.hpp"
#include "dualstruct/policies.hpp"

using namespace dualstruct;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <class... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << args);
  return os.str();
}

double bern_kl(double p, double q) {
  auto term = [](double a, double b) { return a > 0 ? a * std::log(a / b) : 0.0; };
  return term(p, q) + term(1 - p, 1 - q);
}

// The two-arm model where arm a keeps at least 2/5 of its mass on reward 0, at P = (0.5, lambda).
Outcome floor_model() {
  const auto t0 = Clock::now();
  std::vector<std::vector<ArmConstraint>> cons(2);
  cons[0].push_back({{1.0, 0.0}, 0.4});
  const auto spec = StructureSpec::separable(RewardSupport::bernoulli(), 2, cons);
  auto closed = [](double lam) {
    if (lam >= 0.6 || lam == 0.5) return 0.0;
    if (lam > 0.5) return (lam - 0.5) / (0.5 * std::log(0.5 / lam) + 0.5 * std::log(0.5 / (1 - lam)));
    return (0.5 - lam) / bern_kl(lam, 0.5);
  };
  double worst = 0.0;
  bool ok = true;
  for (double lam : {0.5, 0.7, 0.9, 0.30, 0.45, 0.55}) {
    const auto res = lower_bound_dual(spec, RewardMatrix::bernoulli({0.5, lam}), 1e-6);
    const double target = closed(lam);
    const double err = std::abs(res.value - target);
    worst = std::max(worst, err);
    ok = ok && res.ok() && (target == 0.0 ? res.value == 0.0 : err <= 1e-4);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 5.0, cat("max error ", worst, ", ", secs, " s")};
}

Outcome cross_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  double sep_worst = 0.0, lip_worst = 0.0;
  int bad = 0;
  for (int k = 0; k < 50; ++k) {
    const int arms = 2 + static_cast<int>(rng() % 5);
    std::vector<double> mu(arms);
    for (auto& m : mu) m = U(rng);
    const double best = *std::max_element(mu.begin(), mu.end());
    double closed = 0.0;
    for (double m : mu)
      if (m < best) closed += (best - m) / bern_kl(m, best);
    const auto res = lower_bound_dual(StructureSpec::separable(RewardSupport::bernoulli(), arms),
                                      RewardMatrix::bernoulli(mu), 1e-7);
    const double err = std::abs(res.value - closed);
    sep_worst = std::max(sep_worst, err);
    bad += !res.ok() || err > 1e-4;
  }
  for (int k = 0; k < 25; ++k) {
    const int arms = 3 + static_cast<int>(rng() % 3);
    std::vector<double> pos(arms), mu(arms);
    for (auto& p : pos) p = U(rng);
    std::sort(pos.begin(), pos.end());
    const double L = 0.5;
    // Means on a tent through a random peak, flattened by a common factor so the slope stays below L.
    const double peak = U(rng), top = 0.5 + 0.4 * U(rng), flat = 0.3 + 0.7 * U(rng);
    for (int x = 0; x < arms; ++x) mu[x] = top - flat * L * std::abs(peak - pos[x]);
    const auto spec = StructureSpec::lipschitz_line(pos, L);
    const auto P = RewardMatrix::bernoulli(mu);
    const auto res = lower_bound_dual(spec, P, 1e-7);
    const double lp = lower_bound_lipschitz_lp(P, L, spec.distance);
    const double err = std::abs(res.value - lp);
    lip_worst = std::max(lip_worst, err);
    bad += !res.ok() || err > 1e-4;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 120.0,
          cat(bad, " mismatches, separable max error ", sep_worst, ", Lipschitz max error ", lip_worst, ", ", secs, " s")};
}

Outcome suite_checks(const std::string& suite, const std::function<bool(const std::string&)>& keep) {
  const auto rep = validate_suite(suite, 1);
  bool ok = true;
  int used = 0;
  std::string detail;
  for (const auto& c : rep.checks) {
    if (!keep(c.name)) continue;
    ++used;
    ok = ok && c.passed;
    detail += (detail.empty() ? "" : "; ") + c.name + ": " + c.detail;
  }
  return {ok && used > 0, detail};
}

// A bounded LP with random rows that stay feasible at an interior point.
ConicProgram random_lp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1);
  const int n = 2 + static_cast<int>(rng() % 4);
  const int m = 1 + static_cast<int>(rng() % 6);
  ConicProgram p(n);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) {
    x0[i] = 2.5 + 2.0 * U(rng);
    p.objective[i] = U(rng);
    p.constraints.add_ge({{i, 1.0}}, 0.0);
    p.constraints.add_ge({{i, -1.0}}, -5.0);
  }
  for (int k = 0; k < m; ++k) {
    Terms t;
    double ax = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = U(rng);
      t.emplace_back(i, a);
      ax += a * x0[i];
    }
    p.constraints.add_ge(t, ax - std::abs(U(rng)));
  }
  if (rng() % 3 == 0) {
    Terms t;
    double ax = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = U(rng);
      t.emplace_back(i, a);
      ax += a * x0[i];
    }
    p.constraints.add_eq(t, ax);
  }
  return p;
}

Outcome solver_sanity() {
  ConicProgram e(1);
  e.objective[0] = 1.0;
  e.triples.push_back({AffineExpr::constant_value(1.0), AffineExpr::var(0), AffineExpr::constant_value(1.0)});
  const auto s = solve(e, 1e-10);
  const double e_err = std::abs(s.x[0] - std::exp(1.0));
  std::mt19937_64 rng(99);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto p = random_lp(rng);
    const auto a = solve(p, 1e-10);
    const auto b = lp_solve(p);
    const double err = std::abs(a.objective - b.objective);
    worst = std::max(worst, err);
    bad += !a.ok() || !b.ok() || err > 1e-6;
  }
  return {s.ok() && e_err < 1e-7 && bad == 0,
          cat("|y - e| = ", e_err, "; ", bad, " of 100 LPs disagree, max difference ", worst)};
}

PolicySpec policy(const std::string& kind) {
  PolicySpec p;
  p.kind = kind;
  return p;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// DUSA runs on the Lipschitz benchmark, shared by the exploration and timing criteria.
struct LipschitzRuns {
  std::vector<RunResult> dusa, ossb;
  double seconds = 0.0;
};

const LipschitzRuns& lipschitz_runs() {
  static const LipschitzRuns runs = [] {
    LipschitzRuns r;
    const auto t0 = Clock::now();
    const Instance inst = gen_lipschitz_instance(1);
    const double C = lower_bound_dual(inst.spec, inst.truth, 1e-3).value;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      r.dusa.push_back(run_single(inst, 0, C, policy("dusa"), 0, seed, 10000, 100));
      r.ossb.push_back(run_single(inst, 0, C, policy("ossb"), 1, seed, 10000, 100));
      std::fprintf(stderr, "  lipschitz seed %llu: dusa s_T %ld regret %.2f, ossb-style regret %.2f\n",
                   static_cast<unsigned long long>(seed), r.dusa.back().last().s_t, r.dusa.back().last().cum_regret,
                   r.ossb.back().last().cum_regret);
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

Outcome dusa_lipschitz() {
  const auto& runs = lipschitz_runs();
  bool ok = true;
  std::string ratios;
  double dusa_norm = 0.0, ossb_norm = 0.0;
  for (std::size_t k = 0; k < runs.dusa.size(); ++k) {
    const auto& r = runs.dusa[k];
    if (!r.error.empty() || !runs.ossb[k].error.empty()) return {false, "run error: " + r.error + runs.ossb[k].error};
    const double early = r.at(1000)->s_t / std::log(1000.0);
    const double late = r.last().s_t / std::log(10000.0);
    const double ratio = early > 0 ? late / early : std::numeric_limits<double>::infinity();
    ok = ok && ratio <= 3.0 && ratio >= 1.0 / 3.0;
    ratios += cat(ratios.empty() ? "" : " ", ratio);
    dusa_norm += r.last().normalized_regret / runs.dusa.size();
    ossb_norm += runs.ossb[k].last().normalized_regret / runs.ossb.size();
  }
  const bool regret_ok = dusa_norm <= 2.0 * ossb_norm;
  return {ok && regret_ok && runs.seconds < 1800.0,
          cat("s ratios [", ratios, "]; mean normalized regret dusa ", dusa_norm, " vs ossb-style ", ossb_norm, "; ",
              runs.seconds, " s")};
}

Outcome exploit_faster() {
  const auto& runs = lipschitz_runs();
  std::vector<double> exploit, explore;
  for (const auto& r : runs.dusa)
    for (std::size_t t = 0; t < r.phases.size(); ++t) {
      const Phase ph = r.phases[t];
      if (ph == Phase::exploit) exploit.push_back(r.round_us[t]);
      else if (ph != Phase::init) explore.push_back(r.round_us[t]);
    }
  const double a = median(exploit), b = median(explore);
  return {!exploit.empty() && !explore.empty() && a < b,
          cat("median exploit ", a, " us over ", exploit.size(), " rounds, explore ", b, " us over ", explore.size(),
              " rounds")};
}

Outcome non_deceitful() {
  const auto t0 = Clock::now();
  std::uint64_t found = 0;
  for (std::uint64_t s = 1; s <= 5000 && !found; ++s) {
    const auto inst = gen_dispersion_instance(s);
    if (classify_arms(inst.spec, inst.truth).deceitful.empty()) found = s;
  }
  if (!found) return {false, "no dispersion instance with an empty deceitful set among seeds 1..5000"};
  const Instance inst = gen_dispersion_instance(found);
  const double C = lower_bound_dual(inst.spec, inst.truth, 1e-3).value;
  double dusa_mid = 0, dusa_end = 0, kl_mid = 0, kl_end = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = run_single(inst, 0, C, policy("dusa"), 0, seed, 10000, 100);
    const auto k = run_single(inst, 0, C, policy("klucb"), 1, seed, 10000, 100);
    if (!d.error.empty() || !k.error.empty()) return {false, "run error: " + d.error + k.error};
    dusa_mid += d.at(5000)->cum_regret;
    dusa_end += d.last().cum_regret;
    kl_mid += k.at(5000)->cum_regret;
    kl_end += k.last().cum_regret;
  }
  const double dusa_inc = dusa_end / dusa_mid - 1.0, kl_inc = kl_end / kl_mid - 1.0;
  const double secs = seconds_since(t0);
  return {dusa_inc < 0.05 && kl_inc > 0.20 && secs < 1200.0,
          cat("instance seed ", found, ", C = ", C, "; dusa +", 100 * dusa_inc, "% (", dusa_mid / 10, " -> ",
              dusa_end / 10, "), klucb +", 100 * kl_inc, "% (", kl_mid / 10, " -> ", kl_end / 10, "); ", secs, " s")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form lower bound on the floor model", floor_model},
      {"cross-oracle agreement", cross_oracle},
      {"duality suite",
       [] { return suite_checks("duality", [](const std::string& n) { return n.find("duality") != std::string::npos; }); }},
      {"KL chain decomposition", [] { return suite_checks("decomposition", [](const std::string&) { return true; }); }},
      {"concentration tail", [] { return suite_checks("concentration", [](const std::string&) { return true; }); }},
      {"DUSA logarithmic exploration on the Lipschitz benchmark", dusa_lipschitz},
      {"non-deceitful boundedness", non_deceitful},
      {"dual test monotone and homogeneous",
       [] { return suite_checks("duality", [](const std::string& n) { return n.find("monotone") != std::string::npos; }); }},
      {"solver sanity", solver_sanity},
      {"exploitation rounds faster than exploration rounds", exploit_faster},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
