#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mbac/actor.hpp"
#include "mbac/critic.hpp"
#include "mbac/mdp.hpp"
#include "mbac/policy.hpp"

namespace mbac {

/**
 * Seeded MDP generators: "two_state_chain" (the canonical 2-state/2-action
 * chain with reward on entering state 1), "garnet" (params S, A, branching:
 * per-(s,a) random successor sets with uniform-spacing weights, rewards
 * uniform in [0, r_max], Dirichlet(1) restart distribution), and "gridworld"
 * (params n: deterministic n x n grid, four moves, reward on entering the
 * last cell, uniform restart). Common params: discount, r_max.
 * Throws std::invalid_argument for unknown generators or bad params.
 */
FiniteMdp generate_mdp(const std::string& name,
                       const std::map<std::string, double>& params,
                       std::uint64_t seed);

/** Feature construction request for policy or critic features. */
struct FeatureSpec {
  std::string kind = "tabular";  // "tabular" | "random"
  int dim = 0;                   // random kind only
  std::uint64_t seed = 0;
};

/**
 * Algorithm selection plus per-kind parameters. "ac" and "nac" drive full
 * actor-critic runs, "td" runs standalone mini-batch TD at the uniform
 * policy, "sa" runs matrix-backed linear stochastic approximation on the
 * built-in restart-mix instance (optionally at prescribed hyperparameters).
 */
struct AlgorithmSpec {
  std::string kind = "ac";  // "ac" | "nac" | "td" | "sa"
  ActorConfig actor;        // ac/nac fields; td uses beta, T_c, M

  int sa_states = 6;
  int sa_dim = 2;
  std::uint64_t sa_data_seed = 123;
  double sa_alpha = 0.05;
  int sa_K = 100;
  int sa_M = 100;
  double sa_target_eps = 0.0;  // > 0 replaces (alpha, K, M) by the prescription
};

/** Parsed experiment description (see parse_experiment_config). */
struct ExperimentConfig {
  std::string mdp_generator;  // one of the sources below must be set
  std::map<std::string, double> mdp_params;
  std::uint64_t mdp_seed = 0;
  std::string mdp_file;
  std::string mdp_inline;  // inline MDP JSON document

  FeatureSpec policy_features;
  FeatureSpec critic_features;
  AlgorithmSpec algorithm;

  std::vector<std::pair<std::string, std::vector<double>>> sweep;  // ordered axes
  int replications = 1;
  std::uint64_t base_seed = 0;

  std::string out_path;
  std::string format = "csv";  // "csv" | "json"
  int workers = 0;             // 0 = hardware default
  bool trace_timing = false;   // emit measured wallclock_ns values

  std::string scaling_metric;  // empty = no scaling fit
  std::string scaling_axis;
  std::string scaling_reduce = "tail_mean";  // "tail_mean" | "final" | "mean"
  double tail_frac = 0.2;
};

/** Parses and validates the JSON experiment document; throws on any problem. */
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/** One (sweep point, seed) outcome: named metric series over iterations. */
struct RunRecord {
  std::string config_id;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::map<std::string, std::vector<double>> series;
  std::uint64_t total_samples = 0;
};

struct MetricSummary {
  std::vector<double> mean, stddev, p10, p50, p90;
};

struct ConfigAggregate {
  std::string config_id;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricSummary> metrics;
  std::uint64_t total_samples = 0;
  int failures = 0;
  bool complete = false;  // every seed of this point succeeded
};

struct ScalingFit {
  std::string axis;
  std::string metric;
  std::vector<double> x, y;  // axis values and reduced metric values
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct AggregateResult {
  std::vector<RunRecord> runs;  // ordered by (sweep point, replicate)
  std::vector<ConfigAggregate> aggregates;
  std::vector<ScalingFit> fits;
  std::uint64_t total_samples = 0;
  std::string config_hash;
};

/**
 * Executes every sweep point x replicate (seeds base_seed + replicate index),
 * in parallel up to the worker count, then aggregates deterministically.
 * Individual run failures are recorded on the result, never rethrown.
 */
AggregateResult run_experiment(const ExperimentConfig& config);

/**
 * Persists the result under config.out_path: metrics.csv (long format:
 * config_id, seed, t, metric, value) or aggregate.json per config.format,
 * plus manifest.json (config hash, artifact version, seeds; no timestamps).
 */
void export_result(const AggregateResult& result, const ExperimentConfig& config);

/** Per-iteration RunTrace CSV with the documented column set. */
void write_trace_csv(const std::string& path, const RunTrace& trace,
                     bool include_timing);

/**
 * The built-in matrix-backed SA instance: N-state restart-mix chain
 * 0.5 I + 0.5/N, per-state drift -(1 + 0.2 (x mod 2)) I and offsets
 * 0.5 u_x with u_x uniform in [-1, 1) normalized by the largest magnitude.
 * Hurwitz by construction with lambda_A about 1.1 and fast mixing, so the
 * theorem-form prescriptions are runnable at desk scale.
 */
LinearSaProblem make_restart_mix_problem(int num_states, int dim,
                                         std::uint64_t data_seed);

/** MDP plus feature sets materialized from a config (shared across runs). */
struct BuiltInstance {
  FiniteMdp mdp;
  std::shared_ptr<const PolicyFeatures> features;
  Eigen::MatrixXd critic_phi;
};

/** Builds the configured MDP and features; throws on any construction error. */
BuiltInstance build_instance(const ExperimentConfig& config);

/** FNV-1a 64-bit hash rendered as 16 hex digits. */
std::string fnv1a_hex(const std::string& text);

/** Canonical JSON text of the parsed config (field-ordered, whitespace-free). */
std::string canonical_config_text(const ExperimentConfig& config);

}  // namespace mbac
