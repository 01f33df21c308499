#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "mbac/actor.hpp"
#include "mbac/harness.hpp"
#include "mbac/oracle.hpp"

using namespace mbac;

namespace {

std::shared_ptr<const PolicyFeatures> tabular_features(int S, int A) {
  return std::make_shared<PolicyFeatures>(PolicyFeatures::tabular(S, A));
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

ActorConfig small_ac_config() {
  ActorConfig cfg;
  cfg.variant = ActorVariant::Ac;
  cfg.alpha = 0.05;
  cfg.B = 32;
  cfg.T = 25;
  cfg.beta = 0.5;
  cfg.T_c = 10;
  cfg.M = 8;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("plain and natural steps apply the documented updates") {
  Eigen::VectorXd w(3), v(3);
  w << 1.0, -2.0, 0.5;
  v << 0.2, 0.0, -0.4;
  const Eigen::VectorXd next = ac_step(w, v, 0.5);
  CHECK(next[0] == doctest::Approx(1.1));
  CHECK(next[1] == doctest::Approx(-2.0));
  CHECK(next[2] == doctest::Approx(0.3));

  // zero Fisher reduces the natural step to alpha / lambda * v
  FisherEstimate zero;
  zero.F = Eigen::MatrixXd::Zero(3, 3);
  zero.batch_size = 4;
  const Eigen::VectorXd nat = nac_step(w, zero, 0.1, v, 0.5);
  CHECK((nat - (w + (0.5 / 0.1) * v)).norm() == doctest::Approx(0.0).epsilon(1e-12));

  FisherEstimate identity;
  identity.F = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd nat2 = nac_step(w, identity, 1.0, v, 1.0);
  CHECK((nat2 - (w + v / 2.0)).norm() == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(nac_step(w, zero, 0.0, v, 0.5), std::invalid_argument);
}

TEST_CASE("gradient estimates are deterministic and advance the cursor by B") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  const SoftmaxPolicy policy(tabular_features(2, 2), Eigen::VectorXd::Zero(4));
  const CriticModel critic = CriticModel::tabular(2);

  PathCursor c1(0, 12), c2(0, 12);
  std::vector<TransitionSample> batch;
  const Eigen::VectorXd v1 =
      actor_gradient_estimate(mdp, policy, critic, 64, c1, false, &batch);
  const Eigen::VectorXd v2 = actor_gradient_estimate(mdp, policy, critic, 64, c2);
  CHECK(same_bits(v1, v2));
  CHECK(v1.size() == 4);
  REQUIRE(batch.size() == 64);
  CHECK(c1.samples_drawn == 64);
  CHECK(c1.state == batch.back().next_state);

  // with a zero critic the estimate averages r * psi, which is bounded by r_max * C_psi
  CHECK(v1.norm() <= mdp.r_max * analytic_score_bound(*policy.features) + 1e-12);
  CHECK_THROWS_AS(actor_gradient_estimate(mdp, policy, critic, 0, c1),
                  std::invalid_argument);
}

TEST_CASE("the raw-successor restart option changes only restart steps") {
  const FiniteMdp mdp = generate_mdp("garnet",
                                     {{"S", 4}, {"A", 2}, {"branching", 2}}, 3);
  const SoftmaxPolicy policy(tabular_features(4, 2), Eigen::VectorXd::Zero(8));
  CriticModel critic(CriticModel::random_features(4, 2, 5).phi);
  critic.theta << 1.0, -0.5;

  PathCursor c1(0, 31), c2(0, 31);
  const Eigen::VectorXd literal =
      actor_gradient_estimate(mdp, policy, critic, 256, c1, false);
  const Eigen::VectorXd resampled =
      actor_gradient_estimate(mdp, policy, critic, 256, c2, true);
  CHECK(!same_bits(literal, resampled));  // restarts occurred and were rescored
  CHECK(c1.samples_drawn == 256);
  CHECK(c2.samples_drawn == 256);
}

TEST_CASE("actor-critic runs preserve the single path and record exact metrics") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  auto features = tabular_features(2, 2);
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(2, 2);
  const ActorConfig cfg = small_ac_config();

  const RunTrace trace = run(mdp, features, phi, cfg);
  REQUIRE(static_cast<int>(trace.rows.size()) == cfg.T);
  CHECK(trace.path_breaks == 0);
  CHECK(trace.total_samples ==
        static_cast<std::uint64_t>(cfg.B + cfg.M * cfg.T_c) * cfg.T);
  CHECK(trace.T_hat >= 1);
  CHECK(trace.T_hat <= cfg.T);
  CHECK(trace.gap_at_T_hat == trace.rows[trace.T_hat - 1].gap);

  const double J_star = optimal_value(mdp).J_star;
  double gap_sum = 0.0, grad_sum = 0.0;
  std::uint64_t prev_samples = 0;
  for (int t = 0; t < cfg.T; ++t) {
    const TraceRow& row = trace.rows[t];
    CHECK(row.t == t + 1);
    CHECK(row.gap == doctest::Approx(J_star - row.J_w));
    CHECK(row.grad_norm_sq >= 0.0);
    CHECK(row.zeta_critic == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(row.J_w >= 0.0);
    CHECK(row.J_w <= J_star + 1e-9);
    CHECK(row.cumulative_samples > prev_samples);
    prev_samples = row.cumulative_samples;
    gap_sum += row.gap;
    grad_sum += row.grad_norm_sq;
  }
  CHECK(trace.rows.front().J_w == doctest::Approx(5.0));  // metrics at w_1 = 0
  CHECK(trace.avg_gap == doctest::Approx(gap_sum / cfg.T));
  CHECK(trace.avg_grad_norm_sq == doctest::Approx(grad_sum / cfg.T));
  CHECK(trace.rows.back().cumulative_samples == trace.total_samples);

  // the objective improves over the run on this easy instance
  CHECK(trace.rows.back().J_w > trace.rows.front().J_w);

  const RunTrace again = run(mdp, features, phi, cfg);
  CHECK(same_bits(trace.w_final, again.w_final));
  CHECK(trace.T_hat == again.T_hat);
}

TEST_CASE("natural actor-critic runs and responds to the damping parameter") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  auto features = tabular_features(2, 2);
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(2, 2);

  ActorConfig cfg = small_ac_config();
  cfg.variant = ActorVariant::Nac;
  cfg.alpha = 0.1;
  cfg.lambda = 1e-2;
  cfg.T = 15;
  cfg.seed = 8;
  const RunTrace trace = run(mdp, features, phi, cfg);
  CHECK(trace.path_breaks == 0);
  CHECK(trace.rows.back().J_w > trace.rows.front().J_w);

  cfg.lambda = 0.0;
  CHECK_THROWS_AS(run(mdp, features, phi, cfg), std::invalid_argument);
  cfg.lambda = 1e-2;
  cfg.B = 0;
  CHECK_THROWS_AS(run(mdp, features, phi, cfg), std::invalid_argument);
  cfg.B = 16;
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(run(mdp, features, phi, cfg), std::invalid_argument);
}

TEST_CASE("warm starting the critic changes the error trajectory, not the path") {
  const FiniteMdp mdp = generate_mdp("garnet",
                                     {{"S", 5}, {"A", 3}, {"branching", 2}}, 7);
  auto features = tabular_features(5, 3);
  const Eigen::MatrixXd phi = CriticModel::random_features(5, 3, 11).phi;

  ActorConfig cfg = small_ac_config();
  cfg.T = 12;
  const RunTrace cold = run(mdp, features, phi, cfg);
  cfg.warm_start_critic = true;
  const RunTrace warm = run(mdp, features, phi, cfg);
  CHECK(cold.total_samples == warm.total_samples);
  CHECK(cold.path_breaks == 0);
  CHECK(warm.path_breaks == 0);
  // same draws in iteration one, divergence later once theta carries over
  CHECK(cold.rows.front().theta_err_sq == warm.rows.front().theta_err_sq);
  bool differs = false;
  for (std::size_t t = 1; t < cold.rows.size(); ++t)
    if (cold.rows[t].theta_err_sq != warm.rows[t].theta_err_sq) differs = true;
  CHECK(differs);
}

TEST_CASE("explicit w0 is respected and first-row metrics are computed at it") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  auto features = tabular_features(2, 2);
  ActorConfig cfg = small_ac_config();
  cfg.T = 3;
  cfg.w0 = Eigen::VectorXd::Zero(4);
  cfg.w0 << 0.5, -0.5, 0.25, -0.25;
  const RunTrace trace = run(mdp, features, Eigen::MatrixXd::Identity(2, 2), cfg);
  const double J0 = objective(mdp, SoftmaxPolicy(features, cfg.w0));
  CHECK(trace.rows.front().J_w == doctest::Approx(J0));

  cfg.w0 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(run(mdp, features, Eigen::MatrixXd::Identity(2, 2), cfg),
                  std::invalid_argument);
}

TEST_CASE("theorem-form hyperparameters scale correctly with the target") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  auto features = tabular_features(2, 2);
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(2, 2);

  const ActorPrescription ac1 =
      prescribe_actor_hyperparams(mdp, features, phi, ActorVariant::Ac, 0.2);
  const ActorPrescription ac2 =
      prescribe_actor_hyperparams(mdp, features, phi, ActorVariant::Ac, 0.1);
  CHECK(ac1.alpha == doctest::Approx(1.0 / (4.0 * ac1.L_J)));
  CHECK(ac1.L_J > 0.0);
  CHECK(ac1.B >= 1);
  CHECK(ac1.T >= 1);
  CHECK(ac1.critic_eps == doctest::Approx(0.2 / 108.0));
  CHECK(ac2.alpha == ac1.alpha);                  // stepsize is eps-free
  CHECK(std::llabs(ac2.B - 2 * ac1.B) <= 2);      // B linear in 1/eps
  CHECK(std::llabs(ac2.T - 2 * ac1.T) <= 2);      // T linear in 1/eps
  CHECK(ac1.critic.K >= 1);
  CHECK(ac1.critic.M >= 1);

  // the tabular critic represents values exactly, so lambda hits its floor
  const ActorPrescription nac =
      prescribe_actor_hyperparams(mdp, features, phi, ActorVariant::Nac, 0.2);
  CHECK(nac.zeta_critic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nac.lambda == doctest::Approx(1e-3));
  CHECK(nac.alpha ==
        doctest::Approx(nac.lambda * nac.lambda / (4.0 * nac.L_J * (1.0 + nac.lambda))));
  CHECK(nac.B >= 1);
  CHECK(nac.T >= 1);

  const ActorPrescription floored = prescribe_actor_hyperparams(
      mdp, features, phi, ActorVariant::Nac, 0.2, 5e-2);
  CHECK(floored.lambda == doctest::Approx(5e-2));
}
