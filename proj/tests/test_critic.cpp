#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "mbac/critic.hpp"
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

}  // namespace

TEST_CASE("critic model construction keeps unit-bounded full-rank rows") {
  const CriticModel tab = CriticModel::tabular(4);
  CHECK(tab.dim() == 4);
  CHECK(tab.phi.isApprox(Eigen::MatrixXd::Identity(4, 4)));
  CHECK(tab.theta.isZero());

  const CriticModel rnd = CriticModel::random_features(6, 3, 19);
  CHECK(rnd.dim() == 3);
  for (int s = 0; s < 6; ++s) CHECK(rnd.phi.row(s).norm() <= 1.0 + 1e-12);
  const CriticModel rnd2 = CriticModel::random_features(6, 3, 19);
  CHECK(rnd.phi.isApprox(rnd2.phi));

  Eigen::MatrixXd big(2, 2);
  big << 5.0, 0.0, 0.0, 3.0;
  const CriticModel scaled((Eigen::MatrixXd(big)));
  CHECK(scaled.phi.row(0).norm() == doctest::Approx(1.0));
  CHECK(scaled.phi(1, 1) == doctest::Approx(3.0 / 5.0));

  CHECK_THROWS_AS(CriticModel(Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(CriticModel(Eigen::MatrixXd::Ones(3, 4)), std::invalid_argument);
}

TEST_CASE("td delta is the one-step Bellman residual") {
  CriticModel model = CriticModel::tabular(2);
  model.theta << 1.0, 0.0;
  TransitionSample sample;
  sample.state = 0;
  sample.action = 0;
  sample.next_state = 1;
  sample.reward = 1.0;
  CHECK(td_delta(model, sample, 0.9) == doctest::Approx(0.0));
  sample.reward = 0.5;
  CHECK(td_delta(model, sample, 0.9) == doctest::Approx(-0.5));
  model.theta << 0.0, 2.0;
  CHECK(td_delta(model, sample, 0.5) == doctest::Approx(0.5 + 1.0));
}

TEST_CASE("matrix SA problem computes the stationary drift and fixed point") {
  const LinearSaProblem problem = make_restart_mix_problem(6, 2, 123);
  REQUIRE(problem.dim == 2);
  REQUIRE(problem.A_x.size() == 6);
  for (int row = 0; row < 6; ++row)
    CHECK(problem.chain.row(row).sum() == doctest::Approx(1.0));

  // the chain is doubly stochastic, so the stationary mean mixes A_x uniformly
  CHECK(problem.lambda_A == doctest::Approx(1.1));
  CHECK(problem.C_A == doctest::Approx(1.2 * std::sqrt(2.0)));
  CHECK(problem.C_b <= 0.5 * std::sqrt(2.0) + 1e-12);
  CHECK((problem.A_bar * problem.theta_star + problem.b_bar).norm() ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(problem.kappa_hat >= 1.0);
  CHECK(problem.rho_hat == doctest::Approx(0.5));
  CHECK(problem.R_theta == doctest::Approx(2.0 * problem.theta_star.norm()));
}

TEST_CASE("linear SA contracts toward the fixed point deterministically") {
  const LinearSaProblem problem = make_restart_mix_problem(6, 2, 123);
  SaCursor c1(0, 402), c2(0, 402);
  std::vector<double> trace;
  const Eigen::VectorXd theta1 =
      linear_sa(problem, 0.05, 300, 32, c1, Eigen::VectorXd::Zero(2),
                &problem.theta_star, &trace);
  const Eigen::VectorXd theta2 =
      linear_sa(problem, 0.05, 300, 32, c2, Eigen::VectorXd::Zero(2));
  CHECK(same_bits(theta1, theta2));  // bitwise determinism
  REQUIRE(trace.size() == 300);
  CHECK(trace.back() < 5e-3);
  CHECK(trace.back() < trace.front());
  CHECK(c1.samples_drawn == 300 * 32);

  CHECK_THROWS_AS(
      linear_sa(problem, 0.05, 0, 32, c1, Eigen::VectorXd::Zero(2)),
      std::invalid_argument);
  CHECK_THROWS_AS(
      linear_sa(problem, 0.05, 10, 0, c1, Eigen::VectorXd::Zero(2)),
      std::invalid_argument);
}

TEST_CASE("TD over triples and generic SA produce bitwise identical iterates") {
  const FiniteMdp mdp = generate_mdp("garnet",
                                     {{"S", 5}, {"A", 3}, {"branching", 2}}, 7);
  const SoftmaxPolicy policy(tabular_features(5, 3), Eigen::VectorXd::Zero(15));
  const Eigen::MatrixXd phi = CriticModel::random_features(5, 3, 11).phi;

  CriticModel td_model(phi);
  PathCursor td_cursor(2, 909);
  const TdRunResult td = minibatch_td(mdp, policy, td_model, 0.5, 12, 8, td_cursor);

  const CriticModel sa_model(phi);
  const LinearSaProblem problem = make_td_sa_problem(mdp, policy, sa_model);
  PathCursor path(2, 909);
  SaCursor sa_cursor(path);
  const Eigen::VectorXd theta =
      linear_sa(problem, 0.5, 12, 8, sa_cursor, Eigen::VectorXd::Zero(3));

  CHECK(same_bits(td.theta, theta));  // same draws, same arithmetic, same bits
  CHECK(same_bits(td_model.theta, theta));
  CHECK(td_cursor.state == path.state);
  CHECK(td_cursor.samples_drawn == path.samples_drawn);
  CHECK(td.exit_state == path.state);
}

TEST_CASE("mini-batch TD converges to the projected fixed point") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  const SoftmaxPolicy policy(tabular_features(2, 2), Eigen::VectorXd::Zero(4));
  const TdFixedPoint fp =
      td_fixed_point(mdp, policy, Eigen::MatrixXd::Identity(2, 2));

  CriticModel model = CriticModel::tabular(2);
  PathCursor cursor(0, 15);
  const TdRunResult result =
      minibatch_td(mdp, policy, model, 0.5, 400, 64, cursor, &fp.theta_star);
  REQUIRE(result.err_trace.size() == 400);
  CHECK(result.err_trace.back() < 0.02 * fp.theta_star.squaredNorm());
  CHECK(result.err_trace.back() < result.err_trace.front());
  CHECK(cursor.samples_drawn == 400 * 64);
  CHECK(same_bits(model.theta, result.theta));
}

TEST_CASE("TD SA problem constants match the fixed-point oracle") {
  const FiniteMdp mdp = generate_mdp("garnet",
                                     {{"S", 5}, {"A", 3}, {"branching", 2}}, 7);
  const SoftmaxPolicy policy(tabular_features(5, 3), Eigen::VectorXd::Zero(15));
  const CriticModel model(CriticModel::random_features(5, 3, 11).phi);
  const LinearSaProblem problem = make_td_sa_problem(mdp, policy, model, true);
  const TdFixedPoint fp = td_fixed_point(mdp, policy, model.phi);

  CHECK((problem.A_bar - fp.A).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((problem.b_bar - fp.b).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((problem.theta_star - fp.theta_star).norm() ==
        doctest::Approx(0.0).epsilon(1e-10));
  CHECK(problem.lambda_A == doctest::Approx(fp.lambda_A));
  CHECK(problem.triple_index(1, 2, 3) == (1 * 3 + 2) * 5 + 3);
  CHECK(problem.C_A > 0.0);
  CHECK(problem.C_b > 0.0);
}

TEST_CASE("SA prescription scales the right way with the target accuracy") {
  const LinearSaProblem problem = make_restart_mix_problem(6, 2, 123);
  const SaPrescription p1 = prescribe_sa_hyperparams(problem, 0.01);
  const SaPrescription p2 = prescribe_sa_hyperparams(problem, 0.005);

  CHECK(p1.alpha ==
        doctest::Approx(std::min(problem.lambda_A / (8.0 * problem.C_A * problem.C_A),
                                 4.0 / problem.lambda_A)));
  CHECK(p1.K >= 1);
  CHECK(p1.M >= 1);
  CHECK(p2.K >= p1.K);               // log growth in 1/eps
  CHECK(std::llabs(p2.M - 2 * p1.M) <= 2);  // linear growth in 1/eps
  CHECK(p2.alpha == p1.alpha);

  // the prescribed run actually meets the target on average
  const int seeds = 10;
  double mean_final = 0.0;
  for (int r = 0; r < seeds; ++r) {
    SaCursor cursor(0, 4000 + static_cast<std::uint64_t>(r));
    const Eigen::VectorXd theta =
        linear_sa(problem, p1.alpha, static_cast<int>(p1.K),
                  static_cast<int>(p1.M), cursor, Eigen::VectorXd::Zero(2));
    mean_final += (theta - problem.theta_star).squaredNorm() / seeds;
  }
  CHECK(mean_final <= 0.01);

  LinearSaProblem unstable = problem;
  unstable.lambda_A = 0.0;
  CHECK_THROWS_AS(prescribe_sa_hyperparams(unstable, 0.01), std::invalid_argument);
}
