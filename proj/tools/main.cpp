#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mbac/acceptance.hpp"
#include "mbac/actor.hpp"
#include "mbac/harness.hpp"
#include "mbac/oracle.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::string format;
  long long seed = -1;
  int workers = 0;
  bool trace = false;
};

void add_common(CLI::App* sub, CommonFlags& flags, bool wants_output) {
  sub->add_option("--config", flags.config_path, "experiment config JSON")
      ->required();
  sub->add_option("--seed", flags.seed, "override the base seed");
  if (wants_output) {
    sub->add_option("--out", flags.out_path, "output directory");
    sub->add_option("--format", flags.format, "export format: csv or json");
    sub->add_option("--workers", flags.workers,
                    "worker threads (0 = hardware concurrency)");
    sub->add_flag("--trace", flags.trace,
                  "also write a per-iteration trace CSV with timing");
  }
}

mbac::ExperimentConfig load_config(const CommonFlags& flags,
                                   const std::string& expected_kind) {
  mbac::ExperimentConfig cfg = mbac::load_experiment_config(flags.config_path);
  if (!expected_kind.empty() && cfg.algorithm.kind != expected_kind)
    throw std::runtime_error("config: algorithm.kind is '" + cfg.algorithm.kind +
                             "' but this subcommand runs '" + expected_kind + "'");
  if (flags.seed >= 0)
    cfg.base_seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.out_path.empty()) cfg.out_path = flags.out_path;
  if (!flags.format.empty()) {
    if (flags.format != "csv" && flags.format != "json")
      throw std::runtime_error("config: format must be csv or json");
    cfg.format = flags.format;
  }
  if (flags.workers > 0) cfg.workers = flags.workers;
  if (flags.trace) cfg.trace_timing = true;
  return cfg;
}

int run_configured(const CommonFlags& flags, const std::string& expected_kind,
                   bool require_sweep) {
  mbac::ExperimentConfig cfg = load_config(flags, expected_kind);
  if (require_sweep && cfg.sweep.empty())
    throw std::runtime_error("config: sweep subcommand needs a sweep block");

  const mbac::AggregateResult result = mbac::run_experiment(cfg);
  mbac::export_result(result, cfg);

  if (flags.trace && (cfg.algorithm.kind == "ac" || cfg.algorithm.kind == "nac")) {
    const mbac::BuiltInstance instance = mbac::build_instance(cfg);
    mbac::ActorConfig actor_cfg = cfg.algorithm.actor;
    actor_cfg.seed = cfg.base_seed;
    const mbac::RunTrace trace =
        mbac::run(instance.mdp, instance.features, instance.critic_phi, actor_cfg);
    mbac::write_trace_csv(cfg.out_path + "/trace.csv", trace, true);
  }

  int failures = 0;
  for (const mbac::ConfigAggregate& agg : result.aggregates)
    failures += agg.failures;
  for (const mbac::RunRecord& run : result.runs)
    if (!run.ok)
      std::cerr << "run " << run.config_id << " seed " << run.seed
                << " failed: " << run.error << "\n";

  std::cout << "config " << result.config_hash << ": " << result.runs.size()
            << " runs, " << result.total_samples << " samples -> "
            << cfg.out_path << "\n";
  for (const mbac::ScalingFit& fit : result.fits)
    std::cout << "scaling " << fit.metric << " vs " << fit.axis
              << ": slope=" << fit.slope << " r2=" << fit.r2 << "\n";
  return failures == 0 ? 0 : 1;
}

int run_oracle_dump(const CommonFlags& flags) {
  const mbac::ExperimentConfig cfg = load_config(flags, "");
  const mbac::BuiltInstance instance = mbac::build_instance(cfg);
  Eigen::VectorXd w = cfg.algorithm.actor.w0;
  if (w.size() == 0) w = Eigen::VectorXd::Zero(instance.features->dim);
  const std::string dump = mbac::oracle_dump(
      instance.mdp, mbac::SoftmaxPolicy(instance.features, w),
      instance.critic_phi);
  if (!flags.out_path.empty()) {
    std::filesystem::create_directories(flags.out_path);
    std::ofstream out(flags.out_path + "/oracle.json", std::ios::binary);
    out << dump << "\n";
    std::cout << "wrote " << flags.out_path << "/oracle.json\n";
  } else {
    std::cout << dump << "\n";
  }
  return 0;
}

int run_check(const std::string& out_path, int workers) {
  std::filesystem::create_directories(out_path);
  const std::vector<mbac::CriterionResult> results =
      mbac::run_acceptance(out_path, workers);
  int failed = 0;
  for (const mbac::CriterionResult& r : results) {
    std::printf("[%s] %d %-34s %s\n", r.passed ? "PASS" : "FAIL", r.index,
                r.name.c_str(), r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu/%zu criteria passed\n", results.size() - failed,
              results.size());
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mini-batch actor-critic experiment harness"};
  app.require_subcommand(1);

  CommonFlags run_td_flags, run_ac_flags, run_nac_flags, run_sa_flags,
      sweep_flags, dump_flags;
  std::string check_out = "acceptance_out";
  int check_workers = 0;

  add_common(app.add_subcommand("run-td", "run mini-batch TD evaluation"),
             run_td_flags, true);
  add_common(app.add_subcommand("run-ac", "run mini-batch actor-critic"),
             run_ac_flags, true);
  add_common(app.add_subcommand("run-nac", "run mini-batch natural actor-critic"),
             run_nac_flags, true);
  add_common(app.add_subcommand("run-sa", "run the linear SA instance"),
             run_sa_flags, true);
  add_common(app.add_subcommand("sweep", "run the configured sweep grid"),
             sweep_flags, true);
  add_common(app.add_subcommand("oracle-dump",
                                "print exact solver output for the configured instance"),
             dump_flags, false);
  app.get_subcommand("oracle-dump")
      ->add_option("--out", dump_flags.out_path, "write oracle.json here");

  CLI::App* check = app.add_subcommand("check", "run the acceptance suite");
  check->add_option("--out", check_out, "artifact directory");
  check->add_option("--workers", check_workers,
                    "worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("run-td")) return run_configured(run_td_flags, "td", false);
    if (app.got_subcommand("run-ac")) return run_configured(run_ac_flags, "ac", false);
    if (app.got_subcommand("run-nac")) return run_configured(run_nac_flags, "nac", false);
    if (app.got_subcommand("run-sa")) return run_configured(run_sa_flags, "sa", false);
    if (app.got_subcommand("sweep")) return run_configured(sweep_flags, "", true);
    if (app.got_subcommand("oracle-dump")) return run_oracle_dump(dump_flags);
    if (app.got_subcommand("check")) return run_check(check_out, check_workers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
