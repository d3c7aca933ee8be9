// Command-line front end: lower bounds, simulation runs, validation suites and solver dumps.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dualstruct/conic.hpp"
#include "dualstruct/harness.hpp"
#include "dualstruct/lowerbound.hpp"

using namespace dualstruct;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("bandit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("BANDIT_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else {
    spdlog::set_level(spdlog::level::info);
    spdlog::warn("BANDIT_LOG='{}' is not one of error, info, debug; using info", level);
  }
}

std::string rates_text(const RateVector& r) {
  std::string s;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += (i ? " " : "") + fmt::format("{:.6g}", r[i]);
  return s;
}

int cmd_lowerbound(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  int failures = 0;
  for (const auto& inst : cfg.instances()) {
    const auto lb = lower_bound_dual(inst.spec, inst.truth, cfg.lower_bound_eps);
    if (!lb.ok()) {
      spdlog::error("{}: solver status {}", inst.id, to_string(lb.status));
      ++failures;
      continue;
    }
    std::cout << inst.id << " C=" << fmt::format("{:.10g}", lb.value) << " deceitful=" << lb.classes.deceitful.size()
              << " non_deceitful=" << lb.classes.non_deceitful.size() << " iterations=" << lb.iterations << "\n";
    std::cout << "  rates " << rates_text(lb.rates) << "\n";
    if (inst.spec.kind == StructureKind::lipschitz && inst.spec.levels() == 2)
      std::cout << "  lp " << fmt::format("{:.10g}", lower_bound_lipschitz_lp(inst.truth, inst.spec.lipschitz, inst.spec.distance))
                << "\n";
    if (inst.spec.kind == StructureKind::separable && inst.spec.arm_constraints.empty())
      std::cout << "  closed form " << fmt::format("{:.10g}", lower_bound_separable(inst.truth)) << "\n";
  }
  return failures ? 1 : 0;
}

int cmd_run(const std::string& path, const std::string& out_override) {
  ExperimentConfig cfg = load_config(path);
  if (!out_override.empty()) cfg.output = out_override;
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!cfg.output.empty()) {
    file.open(cfg.output);
    if (!file) {
      spdlog::error("cannot write {}", cfg.output);
      return 2;
    }
    os = &file;
  }
  *os << kCsvHeader << "\n";
  nlohmann::json summary = nlohmann::json::array();
  int errors = 0;
  spdlog::info("{} instance(s), {} seed(s), {} policies, T = {}", cfg.instances().size(), cfg.seeds.size(),
               cfg.policies.size(), cfg.horizon);
  run_experiment(cfg, [&](const RunResult& r) {
    write_csv_rows(*os, r);
    os->flush();
    if (!r.error.empty()) {
      ++errors;
      spdlog::error("{} seed {} {}: {}", r.instance_id, r.seed, r.policy, r.error);
    } else {
      spdlog::info("{} seed {} {}: regret {:.3f}, explorations {}", r.instance_id, r.seed, r.policy,
                   r.last().cum_regret, r.last().s_t);
    }
    if (r.raw_normalization) spdlog::debug("{}: C(P) vanishes, normalized_regret holds raw regret", r.instance_id);
    summary.push_back({{"instance_id", r.instance_id},
                       {"seed", r.seed},
                       {"policy", r.policy},
                       {"lower_bound", r.lower_bound},
                       {"normalized_is_raw", r.raw_normalization},
                       {"final_regret", r.records.empty() ? 0.0 : r.last().cum_regret},
                       {"explorations", r.records.empty() ? 0L : r.last().s_t},
                       {"error", r.error}});
  });
  if (!cfg.output.empty()) {
    std::ofstream js(cfg.output + ".summary.json");
    js << summary.dump(2) << "\n";
    spdlog::info("wrote {} and {}.summary.json", cfg.output, cfg.output);
  }
  return errors ? 1 : 0;
}

int cmd_validate(const std::string& suite, std::uint64_t seed) {
  const auto rep = validate_suite(suite, seed);
  for (const auto& c : rep.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << suite << ": " << c.name << " (" << c.detail << ")\n";
  return rep.passed() ? 0 : 1;
}

int cmd_dump(const std::string& path, std::size_t index) {
  const ExperimentConfig cfg = load_config(path);
  const auto insts = cfg.instances();
  if (index >= insts.size()) {
    spdlog::error("instance index {} out of range ({} instances)", index, insts.size());
    return 2;
  }
  const auto& inst = insts[index];
  const auto classes = classify_arms(inst.spec, inst.truth);
  const DualProgram dp = build_dual_program(inst.spec, inst.truth, classes);
  std::cout << "# " << inst.id << ": " << dp.prog.variable_count << " variables, "
            << dp.prog.constraints.inequalities.size() << " inequalities, " << dp.prog.constraints.equalities.size()
            << " equalities, " << dp.prog.triples.size() << " exponential-cone triples\n";
  dump_program(dp.prog, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Structured bandits: regret lower bounds, DUSA and baselines"};
  app.require_subcommand(1);

  std::string config, out, suite;
  std::uint64_t seed = 1;
  std::size_t index = 0;

  auto* lb = app.add_subcommand("lowerbound", "Regret lower bound C(P) of each configured instance");
  lb->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Simulate the configured policies and write the CSV");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", out, "CSV path; overrides the config");

  auto* val = app.add_subcommand("validate", "Run a property suite");
  val->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember(suite_names()));
  val->add_option("--seed", seed, "Sampling seed");

  auto* dump = app.add_subcommand("dump-program", "Print the conic lower-bound program of one instance");
  dump->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  dump->add_option("--instance", index, "Instance index in the config");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*lb) return cmd_lowerbound(config);
    if (*run) return cmd_run(config, out);
    if (*val) return cmd_validate(suite, seed);
    if (*dump) return cmd_dump(config, index);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
