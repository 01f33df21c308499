#include "mbac/actor.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mbac/oracle.hpp"

namespace mbac {

namespace {

long long ceil_to_ll(double x) {
  const double capped =
      std::min(std::ceil(x), 9.0e17);  // keep absurd prescriptions finite
  return std::max<long long>(1, static_cast<long long>(capped));
}

/** Exact per-iteration diagnostics at the current (w, theta). */
struct IterationMetrics {
  double J = 0.0;
  double grad_sq = 0.0;
  double theta_err_sq = 0.0;
  double zeta_critic = 0.0;
  double zeta_actor = 0.0;
  Eigen::VectorXd v_mean;  // E[v | w, theta] over the stationary actor batch
};

IterationMetrics exact_metrics(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                               const CriticModel& critic,
                               bool restart_uses_raw_successor) {
  IterationMetrics m;
  m.J = objective(mdp, policy);
  m.grad_sq = exact_gradient(mdp, policy).squaredNorm();
  TdFixedPoint fp = td_fixed_point(mdp, policy, critic.phi);
  m.theta_err_sq = (critic.theta - fp.theta_star).squaredNorm();
  m.zeta_critic = critic_approx_error(mdp, policy, critic.phi);
  m.zeta_actor = actor_approx_error(mdp, policy);

  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const double gamma = mdp.discount;
  const VisitationMeasure vm = visitation_measure(mdp, policy);
  const Eigen::VectorXd values = critic.phi * critic.theta;
  m.v_mean = Eigen::VectorXd::Zero(policy.features->dim);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      if (vm.nu(s, a) == 0.0) continue;
      double delta_bar = 0.0;
      for (int sn = 0; sn < S; ++sn) {
        const double prob =
            restart_uses_raw_successor
                ? mdp.p(s, a, sn)
                : gamma * mdp.p(s, a, sn) + (1.0 - gamma) * mdp.init_dist[sn];
        if (prob == 0.0) continue;
        delta_bar += prob * (mdp.r(s, a, sn) + gamma * values[sn] - values[s]);
      }
      m.v_mean += vm.nu(s, a) * delta_bar * score(policy, s, a);
    }
  return m;
}

}  // namespace

Eigen::VectorXd actor_gradient_estimate(const FiniteMdp& mdp,
                                        const SoftmaxPolicy& policy,
                                        const CriticModel& critic, int B,
                                        PathCursor& cursor,
                                        bool restart_uses_raw_successor,
                                        std::vector<TransitionSample>* batch_out) {
  if (B < 1)
    throw std::invalid_argument("actor_gradient_estimate: batch must be non-empty");
  const double gamma = mdp.discount;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(policy.features->dim);
  for (int i = 0; i < B; ++i) {
    const int a = sample_action(policy, cursor, cursor.state);
    TransitionSample ts = step(mdp, cursor, a, KernelChoice::Visitation);
    double delta;
    if (ts.restarted && restart_uses_raw_successor) {
      Eigen::VectorXd row = mdp.transition[a].row(ts.state);
      const int raw_next = cursor.rng.categorical(row.data(), mdp.num_states);
      delta = mdp.r(ts.state, a, raw_next) +
              gamma * critic.phi.row(raw_next).dot(critic.theta) -
              critic.phi.row(ts.state).dot(critic.theta);
    } else {
      delta = td_delta(critic, ts, gamma);
    }
    v += delta * score(policy, ts.state, ts.action);
    if (batch_out != nullptr) batch_out->push_back(ts);
  }
  return v / static_cast<double>(B);
}

Eigen::VectorXd ac_step(const Eigen::VectorXd& w, const Eigen::VectorXd& v,
                        double alpha) {
  return w + alpha * v;
}

Eigen::VectorXd nac_step(const Eigen::VectorXd& w, const FisherEstimate& fisher,
                         double lambda, const Eigen::VectorXd& v, double alpha) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("nac_step: lambda must be > 0");
  const int d = static_cast<int>(w.size());
  Eigen::MatrixXd damped = fisher.F + lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::LDLT<Eigen::MatrixXd> solver(damped);
  Eigen::VectorXd direction = solver.solve(v);
  const double residual = (damped * direction - v).norm();
  if (!(residual <= 1e-8 * std::max(1.0, v.norm())))
    throw std::runtime_error("nac_step: damped Fisher solve failed");
  return w + alpha * direction;
}

RunTrace run(const FiniteMdp& mdp, std::shared_ptr<const PolicyFeatures> features,
             const Eigen::MatrixXd& critic_phi, const ActorConfig& config) {
  if (config.T < 1 || config.B < 1 || config.T_c < 1 || config.M < 1)
    throw std::invalid_argument("run: T, B, T_c, M must all be >= 1");
  if (!(config.alpha >= 0.0))
    throw std::invalid_argument("run: alpha must be >= 0");
  if (config.variant == ActorVariant::Nac && !(config.lambda > 0.0))
    throw std::invalid_argument("run: Nac requires lambda > 0");

  const int d1 = features->dim;
  Eigen::VectorXd w = config.w0.size() > 0 ? config.w0
                                           : Eigen::VectorXd::Zero(d1).eval();
  if (w.size() != d1)
    throw std::invalid_argument("run: w0 dimension differs from the features");

  CriticModel critic(critic_phi);
  PathCursor cursor(0, config.seed);
  cursor.state = cursor.rng.categorical(mdp.init_dist.data(), mdp.num_states);

  const OptimalSolution opt = optimal_value(mdp);
  SoftmaxPolicy policy(features, w);
  LinearSaProblem td_problem = make_td_sa_problem(mdp, policy, critic);

  RunTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(config.T));
  int expected_entry = cursor.state;
  std::vector<TransitionSample> batch;

  for (int t = 1; t <= config.T; ++t) {
    const auto tick = std::chrono::steady_clock::now();
    policy = policy.with_params(w);
    td_problem.policy = &policy;

    if (cursor.state != expected_entry) trace.path_breaks += 1;
    if (!config.warm_start_critic) critic.theta.setZero();
    SaCursor sa(cursor);
    critic.theta = linear_sa(td_problem, config.beta, config.T_c, config.M, sa,
                             critic.theta);
    const int critic_exit = cursor.state;

    IterationMetrics metrics =
        exact_metrics(mdp, policy, critic, config.restart_uses_raw_successor);

    batch.clear();
    Eigen::VectorXd v = actor_gradient_estimate(
        mdp, policy, critic, config.B, cursor,
        config.restart_uses_raw_successor, &batch);
    if (batch.front().state != critic_exit) trace.path_breaks += 1;
    expected_entry = cursor.state;

    if (config.variant == ActorVariant::Ac) {
      w = ac_step(w, v, config.alpha);
    } else {
      FisherEstimate fisher = fisher_estimate(policy, batch);
      w = nac_step(w, fisher, config.lambda, v, config.alpha);
    }

    TraceRow row;
    row.t = t;
    row.grad_norm_sq = metrics.grad_sq;
    row.J_w = metrics.J;
    row.gap = opt.J_star - metrics.J;
    row.theta_err_sq = metrics.theta_err_sq;
    row.zeta_critic = metrics.zeta_critic;
    row.zeta_actor = metrics.zeta_actor;
    row.grad_est_err_sq = (v - metrics.v_mean).squaredNorm();
    row.cumulative_samples = cursor.samples_drawn;
    row.wallclock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - tick)
                           .count();
    trace.rows.push_back(row);
  }

  trace.w_final = w;
  trace.T_hat = 1 + static_cast<int>(cursor.rng.below(config.T));
  trace.gap_at_T_hat = trace.rows[trace.T_hat - 1].gap;
  double gap_sum = 0.0;
  double grad_sum = 0.0;
  for (const TraceRow& row : trace.rows) {
    gap_sum += row.gap;
    grad_sum += row.grad_norm_sq;
  }
  trace.avg_gap = gap_sum / config.T;
  trace.avg_grad_norm_sq = grad_sum / config.T;
  trace.total_samples = cursor.samples_drawn;
  trace.exit_state = cursor.state;
  return trace;
}

ActorPrescription prescribe_actor_hyperparams(
    const FiniteMdp& mdp, std::shared_ptr<const PolicyFeatures> features,
    const Eigen::MatrixXd& critic_phi, ActorVariant variant, double eps,
    double lambda_min, std::uint64_t seed) {
  if (!(eps > 0.0))
    throw std::invalid_argument("prescribe_actor_hyperparams: eps must be > 0");
  if (!(lambda_min > 0.0))
    throw std::invalid_argument("prescribe_actor_hyperparams: lambda_min must be > 0");

  const double gamma = mdp.discount;
  SoftmaxPolicy pi0(features, Eigen::VectorXd::Zero(features->dim));

  ActorPrescription out;
  LipschitzReport lip = lipschitz_constants(mdp, *features, seed);
  out.L_J = lip.L_J;
  const double L_psi = analytic_score_lipschitz(*features);

  MixingConstants mixing =
      mixing_constants(state_action_chain(mdp, pi0, KernelChoice::Visitation));
  out.kappa_hat = mixing.kappa_hat;
  out.rho_hat = mixing.rho_hat;
  const double mix =
      (1.0 + (mixing.kappa_hat - 1.0) * mixing.rho_hat) / (1.0 - mixing.rho_hat);

  TdFixedPoint fp = td_fixed_point(mdp, pi0, critic_phi);
  out.R_theta = 2.0 * fp.theta_star.norm();
  out.zeta_critic = critic_approx_error(mdp, pi0, critic_phi);
  const double reach = mdp.r_max + 2.0 * out.R_theta;

  if (variant == ActorVariant::Ac) {
    out.alpha = 1.0 / (4.0 * out.L_J);
    out.B = ceil_to_ll(216.0 * reach * reach * mix / eps);
    out.T = ceil_to_ll(48.0 * out.L_J * mdp.r_max / ((1.0 - gamma) * eps));
    out.critic_eps = eps / 108.0;
    out.lambda = 0.0;
  } else {
    const double lam = std::max(std::sqrt(out.zeta_critic), lambda_min);
    out.lambda = lam;
    out.alpha = lam * lam / (4.0 * out.L_J * (1.0 + lam));

    const double t1 = 16.0 * out.L_J * (1.0 + lam) / (eps * (1.0 - gamma) * lam * lam);
    const double t2 = 16.0 * mdp.r_max * L_psi * (1.0 + lam) /
                      (eps * (1.0 - gamma) * (1.0 - gamma) * lam * lam);
    out.T = ceil_to_ll(std::max(t1, t2));

    // exact representation makes the zeta-denominated clauses degenerate; the
    // floored lambda^2 (the value sqrt(zeta) is floored to) stands in
    const double zeta_eff = out.zeta_critic > 0.0 ? out.zeta_critic : lam * lam;
    const double b1 = 24.0 * reach * reach * mix / zeta_eff;
    const double b2 = 8.0 * mdp.r_max * mdp.r_max * mix /
                      (lam * lam * (1.0 - gamma) * (1.0 - gamma) * zeta_eff);
    const double b3 = 3.0 * L_psi * (1.0 + lam) / (eps * (1.0 - gamma) * out.L_J) *
                      (32.0 * mdp.r_max * mdp.r_max /
                           (lam * lam * lam * lam * (1.0 - gamma) * (1.0 - gamma)) +
                       432.0 * reach * reach / (lam * lam)) *
                      mix;
    out.B = ceil_to_ll(std::max({b1, b2, b3}));

    const double c2 =
        eps * lam * lam * (1.0 - gamma) * out.L_J / (324.0 * L_psi * (1.0 + lam));
    out.critic_eps =
        out.zeta_critic > 0.0 ? std::min(out.zeta_critic / 64.0, c2) : c2;
  }

  CriticModel model(critic_phi);
  LinearSaProblem problem = make_td_sa_problem(mdp, pi0, model, true);
  out.critic = prescribe_sa_hyperparams(problem, out.critic_eps);
  return out;
}

}  // namespace mbac
