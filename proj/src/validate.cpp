#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dualstruct/harness.hpp"
#include "dualstruct/infodual.hpp"
#include "dualstruct/lowerbound.hpp"

namespace dualstruct {

bool ValidationReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> suite_names() { return {"duality", "cones", "decomposition", "lowerbound", "concentration"}; }

namespace {

template <class... T>
std::string fmt(const T&... parts) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << parts);
  return os.str();
}

RewardMatrix random_columns(const RewardSupport& sup, int arms, std::mt19937_64& rng) {
  std::gamma_distribution<double> G(1.5, 1.0);
  Eigen::MatrixXd M(sup.size(), arms);
  for (int x = 0; x < arms; ++x) {
    for (std::size_t r = 0; r < sup.size(); ++r) M(r, x) = G(rng) + 1e-3;
    M.col(x) /= M.col(x).sum();
  }
  return RewardMatrix(sup, M);
}

RateVector random_rates(int arms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.2, 3.0);
  RateVector eta(arms);
  for (int x = 0; x < arms; ++x) eta[x] = U(rng);
  return eta;
}

DualVars sampled_dual(const StructureSpec& spec, std::mt19937_64& rng) {
  auto [lam, aux] = sample_dual_member(spec, rng);
  std::normal_distribution<double> N(0.0, 1.0);
  DualVars mu;
  mu.lambda = Eigen::Map<Eigen::MatrixXd>(lam.data(), spec.levels(), spec.arms);
  mu.aux = aux;
  mu.alpha = std::abs(N(rng));
  mu.beta = N(rng);
  return mu;
}

// Pure reward tilt toward xp: a direction along which the dual function starts uphill.
DualVars tilted(const RewardMatrix& P, int xp, double scale) {
  DualVars mu = DualVars::zeros(P.levels(), P.arms());
  mu.alpha = scale;
  mu.beta = -scale * mean_reward(P, xp);
  return mu;
}

std::vector<StructureSpec> sample_structures() {
  std::vector<StructureSpec> specs;
  specs.push_back(StructureSpec::separable(RewardSupport::uniform_grid(3), 3));
  specs.push_back(StructureSpec::lipschitz_line({0.1, 0.4, 0.6, 0.9}, 0.8));
  Eigen::MatrixXd F(4, 2);
  F << 0.2, 1, 0.5, 1, 0.7, 1, 0.9, 1;
  specs.push_back(StructureSpec::linear(RewardSupport::bernoulli(), F));
  specs.push_back(StructureSpec::dispersion_bound(RewardSupport::uniform_grid(4), {0.6, 0.7, 0.9}));
  return specs;
}

RewardMatrix sample_instance(const StructureSpec& spec, std::mt19937_64& rng) {
  return spec.kind == StructureKind::separable ? random_columns(spec.support, spec.arms, rng)
                                               : sample_model_member(spec, rng, 6);
}

ValidationReport duality_suite(std::uint64_t seed) {
  ValidationReport rep{"duality", {}};
  std::mt19937_64 rng(seed);
  int weak = 0, weak_bad = 0, strong = 0, strong_bad = 0;
  double weak_worst = -kInf, strong_worst = 0.0;
  const auto specs = sample_structures();
  constexpr int per_structure = 25;
  for (const auto& spec : specs) {
    int found = 0;
    for (int attempt = 0; attempt < 2000 && found < per_structure; ++attempt) {
      const RewardMatrix P = sample_instance(spec, rng);
      if (optimal_arms(P, 1e-6).size() != 1) continue;
      const auto cls = classify_arms(spec, P);
      if (cls.deceitful.empty()) continue;
      ++found;
      const int xp = cls.deceitful[attempt % cls.deceitful.size()];
      const RateVector eta = random_rates(spec.arms, rng);
      const double dist = dist_oracle(eta, xp, P, spec);
      for (int k = 0; k < 5; ++k) {
        const DualVars mu = sampled_dual(spec, rng);
        const double gap = dual_value(eta, xp, P, mu) - dist;
        weak_worst = std::max(weak_worst, gap);
        weak_bad += gap > 1e-8;
        ++weak;
      }
      const DualVars mu = found % 2 ? sampled_dual(spec, rng) : tilted(P, xp, 0.5 + found % 3);
      const double diff = std::abs(halfspace_distance(eta, xp, P, mu) - dual_test(eta, xp, P, mu));
      strong_worst = std::max(strong_worst, diff);
      strong_bad += diff > 1e-5;
      ++strong;
    }
  }
  rep.checks.push_back({"weak duality", weak >= 500 && weak_bad == 0,
                        fmt(weak, " samples, ", weak_bad, " violations beyond 1e-8, max dual - dist ", weak_worst)});
  rep.checks.push_back({"half-space strong duality", strong >= 100 && strong_bad == 0,
                        fmt(strong, " instances, max |halfspace - test| ", strong_worst)});

  // Monotone and positively homogeneous in the rates.
  int mono = 0, mono_bad = 0;
  double mono_worst = 0.0;
  const auto sup = RewardSupport::uniform_grid(3);
  const auto sep = StructureSpec::separable(sup, 3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (mono < 200) {
    const auto P = random_columns(sup, 3, rng);
    const auto sub = suboptimal_arms(P);
    if (sub.empty()) continue;
    const int xp = sub[mono % sub.size()];
    const RateVector eta = random_rates(3, rng);
    const DualVars mu = mono % 2 ? sampled_dual(sep, rng) : tilted(P, xp, 1.0 + mono % 5);
    const double v = dual_test(eta, xp, P, mu);
    const double a = 0.1 + 10.0 * U(rng);
    const double hom = std::abs(dual_test(a * eta, xp, P, mu) - a * v) / std::max(1.0, a * v);
    RateVector bigger = eta;
    bigger[mono % 3] += U(rng);
    const double drop = v - dual_test(bigger, xp, P, mu);
    mono_worst = std::max({mono_worst, hom, drop / std::max(1.0, v)});
    mono_bad += hom > 1e-8 || drop > 1e-8 * std::max(1.0, v);
    ++mono;
  }
  rep.checks.push_back({"dual test monotone and homogeneous", mono_bad == 0,
                        fmt(mono, " points, worst relative deviation ", mono_worst)});
  return rep;
}

ValidationReport cones_suite(std::uint64_t seed) {
  ValidationReport rep{"cones", {}};
  std::mt19937_64 rng(seed);
  for (const auto& spec : sample_structures()) {
    const auto primal = primal_cone(spec);
    const auto dual = dual_cone(spec);
    int bad = 0;
    double worst = kInf;
    for (int k = 0; k < 50; ++k) {
      const RewardMatrix Q = sample_model_member(spec, rng);
      const Eigen::VectorXd q = flatten(Q);
      std::uniform_real_distribution<double> U(0.1, 5.0);
      const double scale = U(rng);
      bad += !is_feasible(spec, Q) || !cone_contains(primal, scale * q);
      auto [lam, aux] = sample_dual_member(spec, rng);
      DualVars mu;
      mu.lambda = Eigen::Map<Eigen::MatrixXd>(lam.data(), spec.levels(), spec.arms);
      mu.aux = aux;
      bad += !dual_feasible(dual, mu);
      const double inner = lam.dot(q);
      worst = std::min(worst, inner);
      bad += inner < -1e-9;
    }
    rep.checks.push_back({to_string(spec.kind) + " primal and dual cones", bad == 0,
                          fmt(bad, " failures, min <lambda, Q> ", worst)});
  }
  return rep;
}

ValidationReport decomposition_suite(std::uint64_t seed) {
  ValidationReport rep{"decomposition", {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int bad = 0;
  double worst = 0.0;
  const int n = 1000;
  for (int trial = 0; trial < n; ++trial) {
    const int k = 2 + trial % 5;
    Eigen::VectorXd ph(k), p(k);
    for (int i = 0; i < k; ++i) {
      ph[i] = (trial % 7 == 0 && i == 1) ? 0.0 : U(rng);
      p[i] = U(rng) + 1e-3;
    }
    ph /= ph.sum();
    p /= p.sum();
    const auto cd = kl_chain_decomposition(ph, p, 1.0 + 100.0 * U(rng));
    const double err = std::abs(cd.left - cd.right) / std::max(1.0, std::abs(cd.left));
    worst = std::max(worst, err);
    bad += err > 1e-10;
  }
  rep.checks.push_back({"chain rule", bad == 0, fmt(n, " instances, worst relative gap ", worst)});
  return rep;
}

ValidationReport lowerbound_suite(std::uint64_t seed) {
  ValidationReport rep{"lowerbound", {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int sep = 0, sep_bad = 0;
  double sep_worst = 0.0;
  while (sep < 50) {
    const int arms = 2 + sep % 4;
    std::vector<double> means(arms);
    for (auto& m : means) m = 0.05 + 0.9 * U(rng);
    const auto P = RewardMatrix::bernoulli(means);
    if (optimal_arms(P, 1e-3).size() > 1) continue;
    const auto res = lower_bound_dual(StructureSpec::separable(RewardSupport::bernoulli(), arms), P, 1e-7);
    const double diff = res.ok() ? std::abs(res.value - lower_bound_separable(P)) : kInf;
    sep_worst = std::max(sep_worst, diff);
    sep_bad += diff > 1e-4;
    ++sep;
  }
  rep.checks.push_back({"separable closed form", sep_bad == 0, fmt(sep, " instances, max |dual - closed| ", sep_worst)});

  int lip = 0, lip_bad = 0;
  double lip_worst = 0.0;
  while (lip < 25) {
    const int arms = 3 + lip % 3;
    std::vector<double> pos(arms);
    for (auto& p : pos) p = U(rng);
    const auto spec = StructureSpec::lipschitz_line(pos, 0.5 + U(rng));
    const auto P = sample_model_member(spec, rng, 5);
    if (optimal_arms(P, 1e-3).size() > 1 || best_arm_and_value(P).value > 0.999) continue;
    const auto res = lower_bound_dual(spec, P, 1e-7);
    const double diff = res.ok() ? std::abs(res.value - lower_bound_lipschitz_lp(P, spec.lipschitz, spec.distance)) : kInf;
    lip_worst = std::max(lip_worst, diff);
    lip_bad += diff > 1e-4;
    ++lip;
  }
  rep.checks.push_back({"Lipschitz linear program", lip_bad == 0, fmt(lip, " instances, max |dual - LP| ", lip_worst)});
  return rep;
}

ValidationReport concentration_suite(std::uint64_t seed) {
  ValidationReport rep{"concentration", {}};
  const std::vector<double> means{0.35, 0.6};
  const long t = 200;
  const int D = 2;
  const double first = D + 1.0;
  const std::vector<double> deltas{first, first + 2.0, first + 5.0};
  const auto freq = concentration_frequency(means, t, deltas, 10000, seed);
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double bound = concentration_bound(deltas[k], static_cast<double>(t), 2, 2);
    rep.checks.push_back({fmt("tail at delta ", deltas[k]), freq[k] <= bound,
                          fmt("frequency ", freq[k], " bound ", bound, " (t = ", t, ", 10000 trials)")});
  }
  return rep;
}

}  // namespace

std::vector<double> concentration_frequency(const std::vector<double>& means, long t, const std::vector<double>& deltas,
                                            int trials, std::uint64_t seed) {
  const int X = static_cast<int>(means.size());
  std::vector<long> hits(deltas.size(), 0);
  for (int k = 0; k < trials; ++k) {
    CounterRng rng(stream_key(0xc0ffee, seed, 0, static_cast<std::uint64_t>(k)));
    std::vector<long> n(X, 0), ones(X, 0);
    for (long s = 0; s < t; ++s) {
      const int x = std::min(X - 1, static_cast<int>(rng.uniform() * X));
      ++n[x];
      ones[x] += rng.uniform() < means[x];
    }
    double stat = 0.0;
    for (int x = 0; x < X; ++x)
      if (n[x] > 0) stat += static_cast<double>(n[x]) * bernoulli_kl(static_cast<double>(ones[x]) / n[x], means[x]);
    for (std::size_t d = 0; d < deltas.size(); ++d) hits[d] += stat >= deltas[d];
  }
  std::vector<double> out;
  for (long h : hits) out.push_back(static_cast<double>(h) / trials);
  return out;
}

ValidationReport validate_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "duality") return duality_suite(seed);
  if (suite == "cones") return cones_suite(seed);
  if (suite == "decomposition") return decomposition_suite(seed);
  if (suite == "lowerbound") return lowerbound_suite(seed);
  if (suite == "concentration") return concentration_suite(seed);
  throw std::invalid_argument("unknown suite: " + suite);
}

}  // namespace dualstruct
