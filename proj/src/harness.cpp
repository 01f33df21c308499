#include "mbac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "mbac/oracle.hpp"
#include "mbac/stats.hpp"

namespace mbac {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_axis_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double param_or(const std::map<std::string, double>& params,
                const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

FiniteMdp make_two_state_chain(double discount) {
  FiniteMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.discount = discount;
  mdp.r_max = 1.0;
  mdp.transition.assign(2, Eigen::MatrixXd::Zero(2, 2));
  mdp.reward.assign(2, Eigen::MatrixXd::Zero(2, 2));
  for (int s = 0; s < 2; ++s) {
    mdp.transition[0](s, s) = 1.0;      // action 0 stays
    mdp.transition[1](s, 1 - s) = 1.0;  // action 1 switches
  }
  for (int a = 0; a < 2; ++a) mdp.reward[a].col(1).setOnes();
  mdp.init_dist = Eigen::VectorXd::Constant(2, 0.5);
  return mdp;
}

/** Uniform spacings of n sorted cuts: a Dirichlet(1, ..., 1) draw over n+1 cells. */
Eigen::VectorXd dirichlet_flat(DetRng& rng, int cells) {
  std::vector<double> cuts(static_cast<std::size_t>(cells) - 1);
  for (double& c : cuts) c = rng.uniform();
  std::sort(cuts.begin(), cuts.end());
  Eigen::VectorXd out(cells);
  double prev = 0.0;
  for (int i = 0; i + 1 < cells; ++i) {
    out[i] = cuts[i] - prev;
    prev = cuts[i];
  }
  out[cells - 1] = 1.0 - prev;
  return out;
}

FiniteMdp make_garnet(int S, int A, int branching, double discount, double r_max,
                      std::uint64_t seed) {
  if (S < 2 || A < 1 || branching < 1 || branching > S)
    throw std::invalid_argument("garnet: need S >= 2, A >= 1, 1 <= branching <= S");
  DetRng rng(seed);
  FiniteMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.discount = discount;
  mdp.r_max = r_max;
  mdp.transition.assign(A, Eigen::MatrixXd::Zero(S, S));
  mdp.reward.assign(A, Eigen::MatrixXd::Zero(S, S));

  std::vector<int> idx(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = 0; i < branching; ++i) {
        const int j = i + static_cast<int>(rng.below(S - i));
        std::swap(idx[i], idx[j]);
      }
      const Eigen::VectorXd probs =
          branching == 1 ? Eigen::VectorXd::Ones(1).eval()
                         : dirichlet_flat(rng, branching);
      for (int i = 0; i < branching; ++i)
        mdp.transition[a](s, idx[i]) = probs[i];
      mdp.reward[a].row(s).setConstant(rng.uniform() * r_max);
    }
  mdp.init_dist = dirichlet_flat(rng, S);
  return mdp;
}

FiniteMdp make_gridworld(int n, double discount) {
  if (n < 2) throw std::invalid_argument("gridworld: need n >= 2");
  const int S = n * n;
  const int goal = S - 1;
  FiniteMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = 4;
  mdp.discount = discount;
  mdp.r_max = 1.0;
  mdp.transition.assign(4, Eigen::MatrixXd::Zero(S, S));
  mdp.reward.assign(4, Eigen::MatrixXd::Zero(S, S));
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const int s = r * n + c;
      for (int a = 0; a < 4; ++a) {
        const int rn = std::clamp(r + dr[a], 0, n - 1);
        const int cn = std::clamp(c + dc[a], 0, n - 1);
        mdp.transition[a](s, rn * n + cn) = 1.0;
        mdp.reward[a](s, goal) = 1.0;
      }
    }
  mdp.init_dist = Eigen::VectorXd::Constant(S, 1.0 / S);
  return mdp;
}

}  // namespace

FiniteMdp generate_mdp(const std::string& name,
                       const std::map<std::string, double>& params,
                       std::uint64_t seed) {
  const double discount = param_or(params, "discount", 0.9);
  if (!(discount > 0.0 && discount < 1.0))
    throw std::invalid_argument("generate_mdp: discount must lie in (0, 1)");
  FiniteMdp mdp;
  if (name == "two_state_chain") {
    mdp = make_two_state_chain(discount);
  } else if (name == "garnet") {
    mdp = make_garnet(static_cast<int>(param_or(params, "S", 5)),
                      static_cast<int>(param_or(params, "A", 3)),
                      static_cast<int>(param_or(params, "branching", 2)),
                      discount, param_or(params, "r_max", 1.0), seed);
  } else if (name == "gridworld") {
    mdp = make_gridworld(static_cast<int>(param_or(params, "n", 3)), discount);
  } else {
    throw std::invalid_argument("generate_mdp: unknown generator '" + name + "'");
  }
  const std::vector<std::string> report = validate(mdp);
  if (!report.empty())
    throw std::runtime_error("generate_mdp: generated MDP fails validation: " +
                             report.front());
  return mdp;
}

LinearSaProblem make_restart_mix_problem(int num_states, int dim,
                                         std::uint64_t data_seed) {
  if (num_states < 2 || dim < 1)
    throw std::invalid_argument("make_restart_mix_problem: need N >= 2, dim >= 1");
  Eigen::MatrixXd chain = Eigen::MatrixXd::Constant(
      num_states, num_states, 0.5 / num_states);
  chain.diagonal().array() += 0.5;

  DetRng rng(data_seed);
  Eigen::MatrixXd u(num_states, dim);
  for (int x = 0; x < num_states; ++x)
    for (int j = 0; j < dim; ++j) u(x, j) = rng.uniform(-1.0, 1.0);
  u /= u.cwiseAbs().maxCoeff();

  std::vector<Eigen::MatrixXd> A_x(num_states);
  std::vector<Eigen::VectorXd> b_x(num_states);
  for (int x = 0; x < num_states; ++x) {
    A_x[x] = -(1.0 + 0.2 * (x % 2)) * Eigen::MatrixXd::Identity(dim, dim);
    b_x[x] = 0.5 * u.row(x).transpose();
  }
  return make_matrix_sa_problem(std::move(chain), std::move(A_x), std::move(b_x));
}

namespace {

FeatureSpec parse_feature_spec(const json& doc, const std::string& where) {
  FeatureSpec spec;
  if (doc.is_null()) return spec;
  if (!doc.is_object())
    throw std::runtime_error("config: " + where + " must be an object");
  spec.kind = doc.value("kind", "tabular");
  if (spec.kind != "tabular" && spec.kind != "random")
    throw std::runtime_error("config: " + where + ".kind must be tabular or random");
  spec.dim = doc.value("dim", 0);
  spec.seed = doc.value("seed", 0ull);
  if (spec.kind == "random" && spec.dim < 1)
    throw std::runtime_error("config: " + where + " random features need dim >= 1");
  return spec;
}

bool apply_axis(AlgorithmSpec& algo, const std::string& name, double value) {
  auto as_int = [&value] { return static_cast<int>(std::llround(value)); };
  if (algo.kind == "ac" || algo.kind == "nac" || algo.kind == "td") {
    if (name == "alpha") algo.actor.alpha = value;
    else if (name == "B") algo.actor.B = as_int();
    else if (name == "lambda") algo.actor.lambda = value;
    else if (name == "T") algo.actor.T = as_int();
    else if (name == "beta") algo.actor.beta = value;
    else if (name == "T_c") algo.actor.T_c = as_int();
    else if (name == "M") algo.actor.M = as_int();
    else return false;
    return true;
  }
  if (algo.kind == "sa") {
    if (name == "alpha") algo.sa_alpha = value;
    else if (name == "K") algo.sa_K = as_int();
    else if (name == "M") algo.sa_M = as_int();
    else if (name == "states") algo.sa_states = as_int();
    else if (name == "dim") algo.sa_dim = as_int();
    else if (name == "target_eps") algo.sa_target_eps = value;
    else return false;
    return true;
  }
  return false;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("config: root must be an object");

  ExperimentConfig cfg;

  if (doc.contains("algorithm")) {
    const json& alg = doc.at("algorithm");
    if (!alg.is_object() || !alg.contains("kind"))
      throw std::runtime_error("config: algorithm.kind is required");
    cfg.algorithm.kind = alg.at("kind").get<std::string>();
    if (cfg.algorithm.kind != "ac" && cfg.algorithm.kind != "nac" &&
        cfg.algorithm.kind != "td" && cfg.algorithm.kind != "sa")
      throw std::runtime_error("config: algorithm.kind must be ac, nac, td or sa");
    ActorConfig& actor = cfg.algorithm.actor;
    actor.variant =
        cfg.algorithm.kind == "nac" ? ActorVariant::Nac : ActorVariant::Ac;
    actor.alpha = alg.value("alpha", actor.alpha);
    actor.B = alg.value("B", actor.B);
    actor.lambda = alg.value("lambda", actor.lambda);
    actor.T = alg.value("T", actor.T);
    actor.beta = alg.value("beta", actor.beta);
    actor.T_c = alg.value("T_c", actor.T_c);
    actor.M = alg.value("M", actor.M);
    actor.warm_start_critic =
        alg.value("warm_start_critic", actor.warm_start_critic);
    actor.restart_uses_raw_successor =
        alg.value("restart_uses_raw_successor", actor.restart_uses_raw_successor);
    if (alg.contains("w0")) {
      const auto values = alg.at("w0").get<std::vector<double>>();
      actor.w0 = Eigen::Map<const Eigen::VectorXd>(
          values.data(), static_cast<Eigen::Index>(values.size()));
    }
    cfg.algorithm.sa_states = alg.value("states", cfg.algorithm.sa_states);
    cfg.algorithm.sa_dim = alg.value("dim", cfg.algorithm.sa_dim);
    cfg.algorithm.sa_data_seed = alg.value("data_seed", cfg.algorithm.sa_data_seed);
    cfg.algorithm.sa_alpha = alg.value("alpha", cfg.algorithm.sa_alpha);
    cfg.algorithm.sa_K = alg.value("K", cfg.algorithm.sa_K);
    cfg.algorithm.sa_M = alg.value("M", cfg.algorithm.sa_M);
    cfg.algorithm.sa_target_eps = alg.value("target_eps", cfg.algorithm.sa_target_eps);
  } else {
    throw std::runtime_error("config: algorithm block is required");
  }

  const bool needs_mdp = cfg.algorithm.kind != "sa";
  if (doc.contains("mdp")) {
    const json& m = doc.at("mdp");
    if (!m.is_object()) throw std::runtime_error("config: mdp must be an object");
    int sources = 0;
    if (m.contains("generator")) {
      cfg.mdp_generator = m.at("generator").get<std::string>();
      ++sources;
    }
    if (m.contains("file")) {
      cfg.mdp_file = m.at("file").get<std::string>();
      ++sources;
    }
    if (m.contains("inline")) {
      cfg.mdp_inline = m.at("inline").dump();
      ++sources;
    }
    if (sources != 1)
      throw std::runtime_error(
          "config: mdp needs exactly one of generator, file, inline");
    cfg.mdp_seed = m.value("seed", 0ull);
    for (const auto& [key, value] : m.items())
      if (value.is_number()) cfg.mdp_params[key] = value.get<double>();
    cfg.mdp_params.erase("seed");
  } else if (needs_mdp) {
    throw std::runtime_error("config: mdp block is required for this algorithm");
  }

  cfg.policy_features = parse_feature_spec(
      doc.contains("policy_features") ? doc.at("policy_features") : json(),
      "policy_features");
  cfg.critic_features = parse_feature_spec(
      doc.contains("critic_features") ? doc.at("critic_features") : json(),
      "critic_features");

  cfg.replications = doc.value("replications", 1);
  if (cfg.replications < 1)
    throw std::runtime_error("config: replications must be >= 1");
  cfg.base_seed = doc.value("base_seed", 0ull);
  cfg.workers = doc.value("workers", 0);
  cfg.trace_timing = doc.value("trace_timing", false);

  if (doc.contains("output")) {
    const json& out = doc.at("output");
    cfg.out_path = out.value("path", "");
    cfg.format = out.value("format", "csv");
    if (cfg.format != "csv" && cfg.format != "json")
      throw std::runtime_error("config: output.format must be csv or json");
  }

  if (doc.contains("sweep")) {
    const json& sweep = doc.at("sweep");
    if (!sweep.is_object())
      throw std::runtime_error("config: sweep must map parameter -> value list");
    for (const auto& [axis, values] : sweep.items()) {
      if (!values.is_array() || values.empty())
        throw std::runtime_error("config: sweep axis '" + axis +
                                 "' needs a non-empty value list");
      AlgorithmSpec scratch = cfg.algorithm;
      if (!apply_axis(scratch, axis, 1.0))
        throw std::runtime_error("config: sweep axis '" + axis +
                                 "' does not name a parameter of algorithm kind " +
                                 cfg.algorithm.kind);
      cfg.sweep.emplace_back(axis, values.get<std::vector<double>>());
    }
  }

  if (doc.contains("scaling")) {
    const json& sc = doc.at("scaling");
    cfg.scaling_metric = sc.value("metric", "");
    cfg.scaling_axis = sc.value("axis", "");
    cfg.scaling_reduce = sc.value("reduce", "tail_mean");
    cfg.tail_frac = sc.value("tail_frac", 0.2);
    if (cfg.scaling_metric.empty() || cfg.scaling_axis.empty())
      throw std::runtime_error("config: scaling needs metric and axis");
    if (cfg.scaling_reduce != "tail_mean" && cfg.scaling_reduce != "final" &&
        cfg.scaling_reduce != "mean")
      throw std::runtime_error("config: scaling.reduce must be tail_mean, final or mean");
    bool axis_swept = false;
    for (const auto& [axis, values] : cfg.sweep)
      if (axis == cfg.scaling_axis) axis_swept = true;
    if (!axis_swept)
      throw std::runtime_error("config: scaling.axis must be a sweep axis");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

BuiltInstance build_instance(const ExperimentConfig& config) {
  BuiltInstance built;
  if (!config.mdp_generator.empty())
    built.mdp = generate_mdp(config.mdp_generator, config.mdp_params, config.mdp_seed);
  else if (!config.mdp_file.empty())
    built.mdp = load_mdp(config.mdp_file);
  else if (!config.mdp_inline.empty())
    built.mdp = parse_mdp(config.mdp_inline);
  else
    throw std::runtime_error("config: no MDP source configured");

  const int S = built.mdp.num_states;
  const int A = built.mdp.num_actions;
  if (config.policy_features.kind == "tabular") {
    built.features =
        std::make_shared<PolicyFeatures>(PolicyFeatures::tabular(S, A));
  } else {
    DetRng rng(config.policy_features.seed);
    Eigen::MatrixXd table(S * A, config.policy_features.dim);
    for (int i = 0; i < table.rows(); ++i)
      for (int j = 0; j < table.cols(); ++j) table(i, j) = rng.normal();
    built.features = std::make_shared<PolicyFeatures>(
        PolicyFeatures::from_table(std::move(table), S, A));
  }

  if (config.critic_features.kind == "tabular")
    built.critic_phi = Eigen::MatrixXd::Identity(S, S);
  else
    built.critic_phi =
        CriticModel::random_features(S, config.critic_features.dim,
                                     config.critic_features.seed)
            .phi;
  return built;
}

namespace {

RunRecord execute_actor_run(const BuiltInstance& in, const AlgorithmSpec& algo,
                            bool trace_timing, std::uint64_t seed) {
  ActorConfig actor = algo.actor;
  actor.seed = seed;
  RunTrace trace = run(in.mdp, in.features, in.critic_phi, actor);

  RunRecord rec;
  rec.total_samples = trace.total_samples;
  auto& s = rec.series;
  const std::size_t T = trace.rows.size();
  for (const char* name :
       {"grad_norm_sq", "J_w", "gap", "theta_err_sq", "zeta_critic",
        "zeta_actor", "grad_est_err_sq", "cumulative_samples"})
    s[name].reserve(T);
  for (const TraceRow& row : trace.rows) {
    s["grad_norm_sq"].push_back(row.grad_norm_sq);
    s["J_w"].push_back(row.J_w);
    s["gap"].push_back(row.gap);
    s["theta_err_sq"].push_back(row.theta_err_sq);
    s["zeta_critic"].push_back(row.zeta_critic);
    s["zeta_actor"].push_back(row.zeta_actor);
    s["grad_est_err_sq"].push_back(row.grad_est_err_sq);
    s["cumulative_samples"].push_back(static_cast<double>(row.cumulative_samples));
    if (trace_timing)
      s["wallclock_ns"].push_back(static_cast<double>(row.wallclock_ns));
  }
  s["T_hat"] = {static_cast<double>(trace.T_hat)};
  s["gap_at_T_hat"] = {trace.gap_at_T_hat};
  s["avg_gap"] = {trace.avg_gap};
  s["avg_grad_norm_sq"] = {trace.avg_grad_norm_sq};
  s["path_breaks"] = {static_cast<double>(trace.path_breaks)};
  rec.ok = true;
  return rec;
}

RunRecord execute_td_run(const BuiltInstance& in, const AlgorithmSpec& algo,
                         std::uint64_t seed) {
  SoftmaxPolicy policy(in.features, Eigen::VectorXd::Zero(in.features->dim));
  CriticModel model(in.critic_phi);
  TdFixedPoint fp = td_fixed_point(in.mdp, policy, in.critic_phi);
  PathCursor cursor(0, seed);
  cursor.state =
      cursor.rng.categorical(in.mdp.init_dist.data(), in.mdp.num_states);
  TdRunResult result =
      minibatch_td(in.mdp, policy, model, algo.actor.beta, algo.actor.T_c,
                   algo.actor.M, cursor, &fp.theta_star);

  RunRecord rec;
  rec.series["theta_err_sq"] = result.err_trace;
  rec.series["final_theta_err_sq"] = {result.err_trace.back()};
  rec.total_samples = cursor.samples_drawn;
  rec.ok = true;
  return rec;
}

RunRecord execute_sa_run(const AlgorithmSpec& algo, std::uint64_t seed) {
  LinearSaProblem problem =
      make_restart_mix_problem(algo.sa_states, algo.sa_dim, algo.sa_data_seed);
  double alpha = algo.sa_alpha;
  long long K = algo.sa_K;
  long long M = algo.sa_M;
  if (algo.sa_target_eps > 0.0) {
    SaPrescription p = prescribe_sa_hyperparams(problem, algo.sa_target_eps);
    alpha = p.alpha;
    K = p.K;
    M = p.M;
  }
  SaCursor cursor(0, seed);
  cursor.state = static_cast<int>(cursor.rng.below(algo.sa_states));
  std::vector<double> err_trace;
  linear_sa(problem, alpha, static_cast<int>(K), static_cast<int>(M), cursor,
            Eigen::VectorXd::Zero(problem.dim), &problem.theta_star, &err_trace);

  RunRecord rec;
  rec.series["err_sq"] = err_trace;
  rec.series["final_err_sq"] = {err_trace.back()};
  rec.total_samples = cursor.samples_drawn;
  rec.ok = true;
  return rec;
}

RunRecord execute_one(const BuiltInstance& in, const AlgorithmSpec& algo,
                      bool trace_timing, const std::string& config_id,
                      std::uint64_t seed) {
  RunRecord rec;
  rec.config_id = config_id;
  rec.seed = seed;
  try {
    if (algo.kind == "ac" || algo.kind == "nac")
      rec = execute_actor_run(in, algo, trace_timing, seed);
    else if (algo.kind == "td")
      rec = execute_td_run(in, algo, seed);
    else
      rec = execute_sa_run(algo, seed);
    rec.config_id = config_id;
    rec.seed = seed;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

struct SweepPoint {
  std::string config_id;
  AlgorithmSpec algo;
  std::map<std::string, double> axis_values;
};

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> points;
  points.push_back({"base", cfg.algorithm, {}});
  for (const auto& [axis, values] : cfg.sweep) {
    std::vector<SweepPoint> next;
    next.reserve(points.size() * values.size());
    for (const SweepPoint& point : points)
      for (double value : values) {
        SweepPoint expanded = point;
        if (!apply_axis(expanded.algo, axis, value))
          throw std::runtime_error("config: sweep axis '" + axis + "' invalid");
        expanded.axis_values[axis] = value;
        const std::string tag = axis + "=" + fmt_axis_value(value);
        expanded.config_id =
            expanded.config_id == "base" ? tag : expanded.config_id + "," + tag;
        next.push_back(std::move(expanded));
      }
    points = std::move(next);
  }
  return points;
}

double reduce_series(const std::vector<double>& mean_series,
                     const std::string& reduce, double tail_frac) {
  if (mean_series.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (reduce == "final") return mean_series.back();
  std::size_t from = 0;
  if (reduce == "tail_mean") {
    const std::size_t tail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(tail_frac * mean_series.size())));
    from = mean_series.size() - tail;
  }
  double sum = 0.0;
  for (std::size_t i = from; i < mean_series.size(); ++i) sum += mean_series[i];
  return sum / static_cast<double>(mean_series.size() - from);
}

}  // namespace

AggregateResult run_experiment(const ExperimentConfig& config) {
  BuiltInstance built;
  if (config.algorithm.kind != "sa") built = build_instance(config);

  const std::vector<SweepPoint> points = expand_sweep(config);
  struct Job {
    const SweepPoint* point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const SweepPoint& point : points)
    for (int rep = 0; rep < config.replications; ++rep)
      jobs.push_back({&point, config.base_seed + static_cast<std::uint64_t>(rep)});

  AggregateResult result;
  result.runs.resize(jobs.size());
  result.config_hash = fnv1a_hex(canonical_config_text(config));

  int workers = config.workers > 0
                    ? config.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp<int>(workers, 1, static_cast<int>(jobs.size()));

  std::atomic<std::size_t> cursor{0};
  auto worker_loop = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      result.runs[i] = execute_one(built, jobs[i].point->algo,
                                   config.trace_timing,
                                   jobs[i].point->config_id, jobs[i].seed);
    }
  };
  if (workers == 1) {
    worker_loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker_loop);
    for (std::thread& t : pool) t.join();
  }

  // ordered reduce: jobs were laid out by (sweep point, replicate)
  std::size_t offset = 0;
  for (const SweepPoint& point : points) {
    ConfigAggregate agg;
    agg.config_id = point.config_id;
    std::vector<const RunRecord*> ok_runs;
    for (int rep = 0; rep < config.replications; ++rep) {
      const RunRecord& rec = result.runs[offset + rep];
      agg.seeds.push_back(rec.seed);
      if (rec.ok) {
        ok_runs.push_back(&rec);
        agg.total_samples += rec.total_samples;
      } else {
        agg.failures += 1;
      }
    }
    agg.complete = agg.failures == 0;
    if (!ok_runs.empty()) {
      for (const auto& [metric, first_series] : ok_runs.front()->series) {
        std::size_t len = first_series.size();
        for (const RunRecord* rec : ok_runs)
          len = std::min(len, rec->series.at(metric).size());
        MetricSummary summary;
        summary.mean.resize(len);
        summary.stddev.resize(len);
        summary.p10.resize(len);
        summary.p50.resize(len);
        summary.p90.resize(len);
        std::vector<double> column(ok_runs.size());
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t r = 0; r < ok_runs.size(); ++r)
            column[r] = ok_runs[r]->series.at(metric)[t];
          summary.mean[t] = mean_of(column);
          summary.stddev[t] = column.size() > 1 ? stddev_of(column) : 0.0;
          summary.p10[t] = quantile_of(column, 0.1);
          summary.p50[t] = quantile_of(column, 0.5);
          summary.p90[t] = quantile_of(column, 0.9);
        }
        agg.metrics.emplace(metric, std::move(summary));
      }
    }
    result.total_samples += agg.total_samples;
    result.aggregates.push_back(std::move(agg));
    offset += static_cast<std::size_t>(config.replications);
  }

  if (!config.scaling_metric.empty()) {
    ScalingFit fit;
    fit.axis = config.scaling_axis;
    fit.metric = config.scaling_metric;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto axis_it = points[i].axis_values.find(config.scaling_axis);
      const ConfigAggregate& agg = result.aggregates[i];
      const auto metric_it = agg.metrics.find(config.scaling_metric);
      if (axis_it == points[i].axis_values.end() || metric_it == agg.metrics.end())
        continue;
      fit.x.push_back(axis_it->second);
      fit.y.push_back(reduce_series(metric_it->second.mean, config.scaling_reduce,
                                    config.tail_frac));
    }
    if (fit.x.size() >= 2) {
      const LinearFit lf = fit_loglog(fit.x, fit.y);
      fit.slope = lf.slope;
      fit.intercept = lf.intercept;
      fit.r2 = lf.r2;
    }
    result.fits.push_back(std::move(fit));
  }
  return result;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_config_text(const ExperimentConfig& config) {
  ordered_json doc;
  doc["mdp_generator"] = config.mdp_generator;
  doc["mdp_params"] = config.mdp_params;
  doc["mdp_seed"] = config.mdp_seed;
  doc["mdp_file"] = config.mdp_file;
  doc["mdp_inline"] = config.mdp_inline;
  doc["policy_features"] = {{"kind", config.policy_features.kind},
                            {"dim", config.policy_features.dim},
                            {"seed", config.policy_features.seed}};
  doc["critic_features"] = {{"kind", config.critic_features.kind},
                            {"dim", config.critic_features.dim},
                            {"seed", config.critic_features.seed}};
  const AlgorithmSpec& algo = config.algorithm;
  doc["algorithm"] = {
      {"kind", algo.kind},
      {"alpha", algo.actor.alpha},
      {"B", algo.actor.B},
      {"lambda", algo.actor.lambda},
      {"T", algo.actor.T},
      {"beta", algo.actor.beta},
      {"T_c", algo.actor.T_c},
      {"M", algo.actor.M},
      {"warm_start_critic", algo.actor.warm_start_critic},
      {"restart_uses_raw_successor", algo.actor.restart_uses_raw_successor},
      {"w0", std::vector<double>(algo.actor.w0.data(),
                                 algo.actor.w0.data() + algo.actor.w0.size())},
      {"sa_states", algo.sa_states},
      {"sa_dim", algo.sa_dim},
      {"sa_data_seed", algo.sa_data_seed},
      {"sa_alpha", algo.sa_alpha},
      {"sa_K", algo.sa_K},
      {"sa_M", algo.sa_M},
      {"sa_target_eps", algo.sa_target_eps}};
  ordered_json sweep = ordered_json::object();
  for (const auto& [axis, values] : config.sweep) sweep[axis] = values;
  doc["sweep"] = sweep;
  doc["replications"] = config.replications;
  doc["base_seed"] = config.base_seed;
  doc["scaling"] = {{"metric", config.scaling_metric},
                    {"axis", config.scaling_axis},
                    {"reduce", config.scaling_reduce},
                    {"tail_frac", config.tail_frac}};
  return doc.dump();
}

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export: cannot write '" + path + "'");
  out << body;
}

}  // namespace

void export_result(const AggregateResult& result, const ExperimentConfig& config) {
  if (config.out_path.empty())
    throw std::runtime_error("export: output path is empty");
  std::filesystem::create_directories(config.out_path);
  const std::filesystem::path base(config.out_path);

  if (config.format == "csv") {
    std::ostringstream csv;
    csv << "config_id,seed,t,metric,value\n";
    for (const RunRecord& rec : result.runs) {
      if (!rec.ok) continue;
      for (const auto& [metric, series] : rec.series)
        for (std::size_t t = 0; t < series.size(); ++t)
          csv << rec.config_id << ',' << rec.seed << ',' << t + 1 << ','
              << metric << ',' << fmt_double(series[t]) << '\n';
    }
    write_file((base / "metrics.csv").string(), csv.str());
  } else {
    ordered_json doc;
    doc["config_hash"] = result.config_hash;
    doc["total_samples"] = result.total_samples;
    ordered_json aggs = ordered_json::array();
    for (const ConfigAggregate& agg : result.aggregates) {
      ordered_json a;
      a["config_id"] = agg.config_id;
      a["seeds"] = agg.seeds;
      a["total_samples"] = agg.total_samples;
      a["failures"] = agg.failures;
      a["complete"] = agg.complete;
      ordered_json metrics = ordered_json::object();
      for (const auto& [name, summary] : agg.metrics)
        metrics[name] = {{"mean", summary.mean},
                         {"stddev", summary.stddev},
                         {"p10", summary.p10},
                         {"p50", summary.p50},
                         {"p90", summary.p90}};
      a["metrics"] = metrics;
      aggs.push_back(std::move(a));
    }
    doc["aggregates"] = aggs;
    ordered_json fits = ordered_json::array();
    for (const ScalingFit& fit : result.fits)
      fits.push_back({{"axis", fit.axis},
                      {"metric", fit.metric},
                      {"x", fit.x},
                      {"y", fit.y},
                      {"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"r2", fit.r2}});
    doc["fits"] = fits;
    write_file((base / "aggregate.json").string(), doc.dump(2) + "\n");
  }

  ordered_json manifest;
  manifest["artifact"] = "mbac";
  manifest["version"] = "1.0.0";
  manifest["config_hash"] = result.config_hash;
  manifest["base_seed"] = config.base_seed;
  manifest["replications"] = config.replications;
  std::vector<std::uint64_t> seeds;
  for (int rep = 0; rep < config.replications; ++rep)
    seeds.push_back(config.base_seed + static_cast<std::uint64_t>(rep));
  manifest["seeds"] = seeds;
  ordered_json failed = ordered_json::array();
  for (const RunRecord& rec : result.runs)
    if (!rec.ok)
      failed.push_back({{"config_id", rec.config_id},
                        {"seed", rec.seed},
                        {"error", rec.error}});
  manifest["failed_runs"] = failed;
  write_file((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

void write_trace_csv(const std::string& path, const RunTrace& trace,
                     bool include_timing) {
  std::ostringstream csv;
  csv << "t,grad_norm_sq,J_w,gap,theta_err_sq,zeta_critic,zeta_actor,"
         "cumulative_samples,wallclock_ns\n";
  for (const TraceRow& row : trace.rows) {
    csv << row.t << ',' << fmt_double(row.grad_norm_sq) << ','
        << fmt_double(row.J_w) << ',' << fmt_double(row.gap) << ','
        << fmt_double(row.theta_err_sq) << ',' << fmt_double(row.zeta_critic)
        << ',' << fmt_double(row.zeta_actor) << ',' << row.cumulative_samples
        << ',' << (include_timing ? row.wallclock_ns : 0) << '\n';
  }
  write_file(path, csv.str());
}

}  // namespace mbac
