#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mbac/actor.hpp"
#include "mbac/harness.hpp"

using namespace mbac;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string temp_dir(const std::string& tag) {
  const std::string path = "harness_test_out/" + tag;
  std::filesystem::create_directories(path);
  return path;
}

ExperimentConfig small_td_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.mdp_generator = "two_state_chain";
  cfg.mdp_params = {{"discount", 0.9}};
  cfg.policy_features.kind = "tabular";
  cfg.critic_features.kind = "tabular";
  cfg.algorithm.kind = "td";
  cfg.algorithm.actor.beta = 0.5;
  cfg.algorithm.actor.T_c = 20;
  cfg.algorithm.actor.M = 4;
  cfg.sweep = {{"M", {4, 8}}};
  cfg.replications = 2;
  cfg.base_seed = 100;
  cfg.out_path = out;
  return cfg;
}

}  // namespace

TEST_CASE("garnet generation is seeded, sparse, and well formed") {
  const std::map<std::string, double> params = {
      {"S", 6}, {"A", 3}, {"branching", 2}, {"discount", 0.85}, {"r_max", 2.0}};
  const FiniteMdp a = generate_mdp("garnet", params, 4);
  const FiniteMdp b = generate_mdp("garnet", params, 4);
  const FiniteMdp c = generate_mdp("garnet", params, 5);
  CHECK(validate(a).empty());
  CHECK(a.discount == 0.85);
  CHECK(a.r_max == 2.0);

  bool same = true, differs = false;
  for (int act = 0; act < 3; ++act) {
    same = same && (a.transition[act].array() == b.transition[act].array()).all() &&
           (a.reward[act].array() == b.reward[act].array()).all();
    differs = differs ||
              !(a.transition[act].array() == c.transition[act].array()).all();
  }
  CHECK(same);
  CHECK(differs);

  for (int act = 0; act < 3; ++act)
    for (int s = 0; s < 6; ++s) {
      CHECK(a.transition[act].row(s).sum() == doctest::Approx(1.0));
      CHECK((a.transition[act].row(s).array() > 0.0).count() <= 2);
      CHECK(a.reward[act].row(s).maxCoeff() <= 2.0);
      CHECK(a.reward[act].row(s).minCoeff() >= 0.0);
    }

  CHECK_THROWS(generate_mdp("garnet", {{"S", 3}, {"branching", 9}}, 0));
  CHECK_THROWS(generate_mdp("no_such_generator", {}, 0));
}

TEST_CASE("gridworld generator builds the clamped-move lattice") {
  const FiniteMdp grid = generate_mdp("gridworld", {{"n", 3}}, 0);
  CHECK(grid.num_states == 9);
  CHECK(grid.num_actions == 4);
  CHECK(validate(grid).empty());
  // moving up from the top-left corner stays put
  CHECK(grid.p(0, 0, 0) == 1.0);
  // stepping right from state 7 reaches the goal corner and pays one
  CHECK(grid.p(7, 3, 8) == 1.0);
  CHECK(grid.r(7, 3, 8) == 1.0);
}

TEST_CASE("config parsing applies defaults and rejects malformed documents") {
  const std::string good = R"({
    "mdp": {"generator": "two_state_chain", "discount": 0.9},
    "algorithm": {"kind": "ac", "alpha": 0.05, "T": 10},
    "replications": 3,
    "base_seed": 11,
    "sweep": {"B": [16, 32]},
    "scaling": {"metric": "grad_norm_sq", "axis": "B"},
    "output": {"path": "somewhere", "format": "json"}
  })";
  const ExperimentConfig cfg = parse_experiment_config(good);
  CHECK(cfg.algorithm.kind == "ac");
  CHECK(cfg.algorithm.actor.alpha == 0.05);
  CHECK(cfg.algorithm.actor.T == 10);
  CHECK(cfg.replications == 3);
  CHECK(cfg.base_seed == 11);
  CHECK(cfg.policy_features.kind == "tabular");
  REQUIRE(cfg.sweep.size() == 1);
  CHECK(cfg.sweep.front().first == "B");
  CHECK(cfg.scaling_axis == "B");
  CHECK(cfg.format == "json");
  CHECK(cfg.out_path == "somewhere");

  CHECK_THROWS_AS(parse_experiment_config("{}"), std::runtime_error);
  CHECK_THROWS_AS(parse_experiment_config("not json"), std::runtime_error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"algorithm": {"kind": "xx"}})"),
                  std::runtime_error);
  // ac without an MDP source
  CHECK_THROWS_AS(parse_experiment_config(R"({"algorithm": {"kind": "ac"}})"),
                  std::runtime_error);
  // two MDP sources at once
  CHECK_THROWS_AS(parse_experiment_config(R"({
    "mdp": {"generator": "two_state_chain", "file": "x.json"},
    "algorithm": {"kind": "ac"}})"),
                  std::runtime_error);
  // unknown sweep axis for this algorithm kind
  CHECK_THROWS_AS(parse_experiment_config(R"({
    "mdp": {"generator": "two_state_chain"},
    "algorithm": {"kind": "ac"},
    "sweep": {"K": [1, 2]}})"),
                  std::runtime_error);
  // scaling over an axis that is not swept
  CHECK_THROWS_AS(parse_experiment_config(R"({
    "mdp": {"generator": "two_state_chain"},
    "algorithm": {"kind": "ac"},
    "scaling": {"metric": "gap", "axis": "B"}})"),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_experiment_config(R"({
    "mdp": {"generator": "two_state_chain"},
    "algorithm": {"kind": "ac"},
    "replications": 0})"),
                  std::runtime_error);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"),
                  std::runtime_error);

  // sa runs need no MDP block
  const ExperimentConfig sa = parse_experiment_config(
      R"({"algorithm": {"kind": "sa", "states": 4, "dim": 2, "K": 5, "M": 6}})");
  CHECK(sa.algorithm.sa_states == 4);
  CHECK(sa.algorithm.sa_K == 5);
}

TEST_CASE("experiments enumerate the sweep grid deterministically") {
  const std::string out = temp_dir("grid");
  const ExperimentConfig cfg = small_td_config(out);
  const AggregateResult res = run_experiment(cfg);

  REQUIRE(res.runs.size() == 4);  // 2 sweep points x 2 replications
  REQUIRE(res.aggregates.size() == 2);
  CHECK(res.aggregates[0].config_id == "M=4");
  CHECK(res.aggregates[1].config_id == "M=8");
  CHECK(res.aggregates[0].seeds == std::vector<std::uint64_t>{100, 101});
  CHECK(res.aggregates[0].complete);
  CHECK(res.aggregates[0].failures == 0);
  for (const RunRecord& run : res.runs) {
    CHECK(run.ok);
    REQUIRE(run.series.count("theta_err_sq") == 1);
    CHECK(run.series.at("theta_err_sq").size() == 20);
  }
  CHECK(res.total_samples == (4 + 8) * 20 * 2);
  CHECK(!res.config_hash.empty());

  // reruns and extra workers change nothing
  const AggregateResult again = run_experiment(cfg);
  ExperimentConfig threaded = cfg;
  threaded.workers = 4;
  const AggregateResult parallel = run_experiment(threaded);
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& s0 = res.runs[i].series.at("theta_err_sq");
    CHECK(s0 == again.runs[i].series.at("theta_err_sq"));
    CHECK(s0 == parallel.runs[i].series.at("theta_err_sq"));
  }
  CHECK(res.config_hash == parallel.config_hash);
}

TEST_CASE("csv export writes the long format with a manifest") {
  const std::string out = temp_dir("csv");
  const ExperimentConfig cfg = small_td_config(out);
  const AggregateResult res = run_experiment(cfg);
  export_result(res, cfg);

  const std::string csv = slurp(out + "/metrics.csv");
  std::istringstream lines(csv);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "config_id,seed,t,metric,value");
  std::size_t rows = 0, expected = 0;
  while (std::getline(lines, line)) ++rows;
  for (const RunRecord& run : res.runs)
    for (const auto& [metric, series] : run.series) expected += series.size();
  CHECK(rows == expected);

  const nlohmann::json manifest = nlohmann::json::parse(slurp(out + "/manifest.json"));
  CHECK(manifest.at("artifact") == "mbac");
  CHECK(manifest.at("config_hash") == res.config_hash);
  CHECK(manifest.at("replications") == 2);
  CHECK(manifest.at("failed_runs").empty());

  ExperimentConfig json_cfg = small_td_config(temp_dir("json"));
  json_cfg.format = "json";
  const AggregateResult res2 = run_experiment(json_cfg);
  export_result(res2, json_cfg);
  const nlohmann::json agg =
      nlohmann::json::parse(slurp(json_cfg.out_path + "/aggregate.json"));
  CHECK(agg.at("aggregates").size() == 2);
  CHECK(agg.at("config_hash") == res2.config_hash);
}

TEST_CASE("scaling fits reduce seed means over the swept axis") {
  ExperimentConfig cfg = small_td_config(temp_dir("fit"));
  cfg.sweep = {{"M", {4, 8, 16, 32}}};
  cfg.replications = 4;
  cfg.scaling_metric = "theta_err_sq";
  cfg.scaling_axis = "M";
  cfg.scaling_reduce = "tail_mean";
  cfg.tail_frac = 0.5;
  cfg.algorithm.actor.T_c = 60;
  const AggregateResult res = run_experiment(cfg);
  REQUIRE(res.fits.size() == 1);
  const ScalingFit& fit = res.fits.front();
  CHECK(fit.axis == "M");
  CHECK(fit.x.size() == 4);
  CHECK(fit.slope < 0.0);  // bigger batches, lower error floor
}

TEST_CASE("sa runs execute inside the experiment harness") {
  ExperimentConfig cfg;
  cfg.algorithm.kind = "sa";
  cfg.algorithm.sa_states = 6;
  cfg.algorithm.sa_dim = 2;
  cfg.algorithm.sa_data_seed = 123;
  cfg.algorithm.sa_alpha = 0.05;
  cfg.algorithm.sa_K = 50;
  cfg.algorithm.sa_M = 8;
  cfg.replications = 2;
  cfg.base_seed = 9;
  cfg.out_path = temp_dir("sa");
  const AggregateResult res = run_experiment(cfg);
  REQUIRE(res.runs.size() == 2);
  for (const RunRecord& run : res.runs) {
    REQUIRE(run.ok);
    CHECK(run.series.at("err_sq").size() == 50);
    CHECK(run.series.at("final_err_sq").size() == 1);
    CHECK(run.series.at("final_err_sq").front() ==
          run.series.at("err_sq").back());
  }
}

TEST_CASE("instance construction problems surface as config errors") {
  ExperimentConfig cfg = small_td_config(temp_dir("fail"));
  cfg.sweep.clear();
  cfg.critic_features.kind = "random";
  cfg.critic_features.dim = 5;  // overcomplete for two states
  cfg.critic_features.seed = 1;
  CHECK_THROWS(run_experiment(cfg));
}

TEST_CASE("run failures are captured per record, not thrown") {
  // two disconnected self-loop states: no stationary law, so the TD run's
  // fixed-point solve fails inside each job
  ExperimentConfig cfg = small_td_config(temp_dir("fail_record"));
  cfg.sweep.clear();
  cfg.mdp_generator.clear();
  cfg.mdp_params.clear();
  cfg.mdp_inline = R"({
    "num_states": 2,
    "num_actions": 1,
    "transition": [[[1.0, 0.0]], [[0.0, 1.0]]],
    "reward_fn": "indicator_next_state=1",
    "init_dist": [0.5, 0.5],
    "discount": 0.9,
    "r_max": 1.0
  })";
  const AggregateResult res = run_experiment(cfg);
  REQUIRE(res.runs.size() == 2);
  for (const RunRecord& run : res.runs) {
    CHECK(!run.ok);
    CHECK(!run.error.empty());
  }
  CHECK(res.aggregates.front().failures == 2);
  CHECK(!res.aggregates.front().complete);
}

TEST_CASE("trace csv carries the documented columns and zeroed timing") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {}, 0);
  auto features = std::make_shared<PolicyFeatures>(PolicyFeatures::tabular(2, 2));
  ActorConfig cfg;
  cfg.T = 4;
  cfg.B = 8;
  cfg.T_c = 3;
  cfg.M = 2;
  cfg.seed = 21;
  const RunTrace trace = run(mdp, features, Eigen::MatrixXd::Identity(2, 2), cfg);

  const std::string out = temp_dir("trace");
  write_trace_csv(out + "/trace.csv", trace, false);
  const std::string text = slurp(out + "/trace.csv");
  std::istringstream lines(text);
  std::string header;
  REQUIRE(std::getline(lines, header));
  CHECK(header ==
        "t,grad_norm_sq,J_w,gap,theta_err_sq,zeta_critic,zeta_actor,"
        "cumulative_samples,wallclock_ns");
  int rows = 0;
  std::string line;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "0");
  }
  CHECK(rows == 4);

  write_trace_csv(out + "/trace_timed.csv", trace, true);
  const std::string timed = slurp(out + "/trace_timed.csv");
  CHECK(timed.find("wallclock_ns") != std::string::npos);
}

TEST_CASE("canonical config text and hash are stable and discriminating") {
  const ExperimentConfig a = small_td_config("dir_a");
  ExperimentConfig b = small_td_config("dir_a");
  CHECK(canonical_config_text(a) == canonical_config_text(b));
  CHECK(fnv1a_hex(canonical_config_text(a)) ==
        fnv1a_hex(canonical_config_text(b)));
  b.algorithm.actor.M = 99;
  CHECK(canonical_config_text(a) != canonical_config_text(b));

  // FNV-1a 64-bit reference vectors
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("built instances honor the feature specs") {
  ExperimentConfig cfg = small_td_config("unused");
  cfg.policy_features.kind = "random";
  cfg.policy_features.dim = 3;
  cfg.policy_features.seed = 2;
  cfg.critic_features.kind = "random";
  cfg.critic_features.dim = 2;
  cfg.critic_features.seed = 3;
  const BuiltInstance built = build_instance(cfg);
  CHECK(built.mdp.num_states == 2);
  CHECK(built.features->dim == 3);
  CHECK(built.critic_phi.rows() == 2);
  CHECK(built.critic_phi.cols() == 2);
}
