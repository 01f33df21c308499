#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mbac/mdp.hpp"
#include "mbac/policy.hpp"

namespace mbac {

/**
 * Linear value approximator V_theta(s) = phi(s) . theta. Feature rows are
 * rescaled once at construction so every ||phi(s)|| <= 1, and phi must have
 * full column rank (min singular value > 1e-10).
 */
struct CriticModel {
  Eigen::MatrixXd phi;    // S x d2
  Eigen::VectorXd theta;  // d2

  explicit CriticModel(Eigen::MatrixXd phi_in);

  static CriticModel tabular(int num_states);
  /** Rows drawn standard normal, then normalized to unit length. */
  static CriticModel random_features(int num_states, int dim, std::uint64_t seed);

  double value(int s) const { return phi.row(s).dot(theta); }
  int dim() const { return static_cast<int>(phi.cols()); }
};

/** TD error delta = r + gamma V_theta(s') - V_theta(s). */
double td_delta(const CriticModel& model, const TransitionSample& sample,
                double gamma);

/**
 * Mini-batch linear stochastic approximation problem: a Markov chain over N
 * abstract noise states with per-state update data A_x, b_x, iterated as
 * theta <- theta + alpha (mean_batch A_x theta + mean_batch b_x).
 *
 * Two sampling backings exist. Matrix-backed problems draw the next abstract
 * state from `chain` by inverse CDF. TD problems are MDP-backed: the abstract
 * state is the transition triple (s, a, s') of the underlying sample path,
 * advanced action-then-successor under the raw kernel, so the TD recursion is
 * literally this iteration with A = phi(s)(gamma phi(s') - phi(s))^T and
 * b = r phi(s).
 */
struct LinearSaProblem {
  int dim = 0;
  std::vector<Eigen::MatrixXd> A_x;
  std::vector<Eigen::VectorXd> b_x;
  Eigen::MatrixXd chain;  // N x N row-stochastic; empty when MDP-backed

  const FiniteMdp* mdp = nullptr;          // set only for MDP-backed problems
  const SoftmaxPolicy* policy = nullptr;   // fixed sampling policy for the path

  // Constants used by the hyperparameter prescription (if filled).
  double C_A = 0.0;          // max Frobenius norm of A_x
  double C_b = 0.0;          // max l2 norm of b_x
  double lambda_A = 0.0;     // -max eigenvalue of sym(A_bar)
  double kappa_hat = 1.0;    // chain mixing constants
  double rho_hat = 0.0;
  double R_theta = 0.0;      // iterate-norm bound, 2 ||theta*|| by default
  Eigen::MatrixXd A_bar;
  Eigen::VectorXd b_bar;
  Eigen::VectorXd theta_star;

  int triple_index(int s, int a, int s_next) const {
    return (s * mdp->num_actions + a) * mdp->num_states + s_next;
  }
};

/** Position of a linear-SA run: abstract chain state or wrapped MDP path. */
struct SaCursor {
  int state = 0;
  DetRng rng;
  PathCursor* path = nullptr;  // non-null selects the MDP-backed mode
  std::uint64_t samples_drawn = 0;

  SaCursor(int start_state, std::uint64_t seed) : state(start_state), rng(seed) {}
  explicit SaCursor(PathCursor& path_cursor) : rng(0), path(&path_cursor) {}
};

/**
 * Matrix-backed problem from explicit per-state data. Computes the bound
 * constants, the stationary means A_bar/b_bar, theta*, lambda_A, and the
 * chain mixing constants so the result is ready for prescriptions.
 */
LinearSaProblem make_matrix_sa_problem(Eigen::MatrixXd chain,
                                       std::vector<Eigen::MatrixXd> A_x,
                                       std::vector<Eigen::VectorXd> b_x);

/**
 * TD learning under the fixed policy as an MDP-backed problem over
 * transition triples. with_constants additionally fills the stationary means
 * (under the raw chain's stationary distribution), theta*, lambda_A, bound
 * constants, and state-chain mixing constants.
 */
LinearSaProblem make_td_sa_problem(const FiniteMdp& mdp,
                                   const SoftmaxPolicy& policy,
                                   const CriticModel& model,
                                   bool with_constants = false);

/**
 * K iterations of theta <- theta + alpha (A_hat theta + b_hat) over batches
 * of M consecutive chain samples. When theta_star is supplied, err_trace (if
 * non-null) receives ||theta_k - theta*||^2 after each iteration.
 */
Eigen::VectorXd linear_sa(const LinearSaProblem& problem, double alpha, int K,
                          int M, SaCursor& cursor, Eigen::VectorXd theta0,
                          const Eigen::VectorXd* theta_star = nullptr,
                          std::vector<double>* err_trace = nullptr);

struct TdRunResult {
  Eigen::VectorXd theta;          // final iterate, also written to the model
  std::vector<double> err_trace;  // ||theta_k - theta*||^2, empty without oracle
  int exit_state = 0;             // cursor state after the last batch
};

/**
 * Mini-batch TD: T_c outer updates theta <- theta + beta mean_batch(delta phi)
 * on M consecutive raw-kernel path samples each, continuing from (and
 * advancing) the supplied cursor. Specializes linear_sa over triples, so its
 * arithmetic and draws match the general iteration exactly.
 */
TdRunResult minibatch_td(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                         CriticModel& model, double beta, int T_c, int M,
                         PathCursor& cursor,
                         const Eigen::VectorXd* theta_star = nullptr);

struct SaPrescription {
  double alpha = 0.0;
  long long K = 0;
  long long M = 0;
};

/**
 * Stepsize, iteration, and batch prescriptions for a target mean squared
 * error: alpha = min{lambda_A / (8 C_A^2), 4 / lambda_A},
 * K >= (8 / (lambda_A alpha)) log(2 ||theta0 - theta*||^2 / eps) and
 * M >= (2/lambda_A + 2 alpha) 384 (C_A^2 R_theta^2 + C_b^2)
 *      (1 + (kappa - 1) rho) / ((1 - rho) lambda_A eps),
 * both clamped to at least 1. Throws when lambda_A <= 0.
 */
SaPrescription prescribe_sa_hyperparams(const LinearSaProblem& problem,
                                        double eps,
                                        const Eigen::VectorXd* theta0 = nullptr);

}  // namespace mbac
