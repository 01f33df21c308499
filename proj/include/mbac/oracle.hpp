#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mbac/mdp.hpp"
#include "mbac/policy.hpp"

namespace mbac {

/** State chain K_pi(s, s') = sum_a pi(a|s) P(s'|s, a) under the raw kernel. */
Eigen::MatrixXd policy_kernel(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

/** State chain of the restart mixture: gamma * K_pi + (1 - gamma) * 1 xi^T. */
Eigen::MatrixXd visitation_state_chain(const FiniteMdp& mdp,
                                       const SoftmaxPolicy& policy);

/**
 * State-action chain over indices s * A + a for the chosen kernel:
 * row (s, a) -> column (s', a') with probability Kernel(s' | s, a) pi(a'|s').
 */
Eigen::MatrixXd state_action_chain(const FiniteMdp& mdp,
                                   const SoftmaxPolicy& policy,
                                   KernelChoice kernel);

/** Expected one-step reward per state under the policy (raw kernel). */
Eigen::VectorXd mean_reward(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

/**
 * Stationary distribution of a row-stochastic matrix via least-squares solve
 * of mu^T K = mu^T with the normalization sum(mu) = 1. Throws
 * std::runtime_error when the eigenvalue 1 is not simple (reducible chain) or
 * the residual exceeds 1e-10.
 */
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain);

/** V_pi = (I - gamma K_pi)^-1 r_pi. */
Eigen::VectorXd value_function(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

struct QAdvantage {
  Eigen::MatrixXd Q;    // S x A
  Eigen::MatrixXd Adv;  // Q - V broadcast over actions
};
QAdvantage q_and_advantage(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

struct VisitationMeasure {
  Eigen::VectorXd d;   // discounted state occupancy, sums to 1
  Eigen::MatrixXd nu;  // S x A, nu(s, a) = d(s) pi(a|s)
};
/** d_pi = (1 - gamma) xi^T (I - gamma K_pi)^-1 by linear solve. */
VisitationMeasure visitation_measure(const FiniteMdp& mdp,
                                     const SoftmaxPolicy& policy);

/**
 * Max-norm gap between visitation_measure and the stationary distribution of
 * the restart-mixture state-action chain (two independent constructions of
 * the same measure).
 */
double visitation_two_construction_gap(const FiniteMdp& mdp,
                                       const SoftmaxPolicy& policy);

/** J(w) = xi . V_pi. */
double objective(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

/** Exact policy gradient (1/(1-gamma)) sum nu(s,a) Adv(s,a) psi(s,a). */
Eigen::VectorXd exact_gradient(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

/** Exact Fisher matrix sum nu(s,a) psi psi^T. */
Eigen::MatrixXd exact_fisher(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

struct TdFixedPoint {
  Eigen::MatrixXd A;          // d2 x d2
  Eigen::VectorXd b;          // d2
  Eigen::VectorXd theta_star; // -A^-1 b
  double lambda_A = 0.0;      // -max eigenvalue of (A + A^T)/2
};
/**
 * TD fixed point under the raw chain's stationary distribution. phi is S x d2
 * and must have full column rank (min singular value > 1e-10).
 */
TdFixedPoint td_fixed_point(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                            const Eigen::MatrixXd& phi);

struct OptimalSolution {
  Eigen::VectorXd V_star;
  double J_star = 0.0;
  std::vector<int> greedy_actions;  // ties broken by lowest action index
};
/** Value iteration to sup-norm tolerance 1e-12 (1 - gamma) / gamma. */
OptimalSolution optimal_value(const FiniteMdp& mdp);

struct MixingConstants {
  double kappa_hat = 1.0;
  double rho_hat = 0.0;
};
/**
 * rho_hat is the second-largest eigenvalue modulus; kappa_hat is the smallest
 * kappa with max_s TV(K^t(s, .), mu) <= kappa rho_hat^t over a log-spaced grid
 * of t (grid ends once TV < 1e-12). Throws on ergodicity failure.
 */
MixingConstants mixing_constants(const Eigen::MatrixXd& chain);

/** nu-weighted squared value-representation error sum nu (V - phi theta*)^2. */
double critic_approx_error(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                           const Eigen::MatrixXd& phi);

/** Max of critic_approx_error over a grid of parameter vectors (lower bound). */
double critic_approx_error_max(const FiniteMdp& mdp, const PolicyFeatures& features,
                               const Eigen::MatrixXd& phi,
                               const std::vector<Eigen::VectorXd>& params_grid);

/** min_p sum nu (psi . p - Adv)^2 via weighted least squares. */
double actor_approx_error(const FiniteMdp& mdp, const SoftmaxPolicy& policy);

struct LipschitzReport {
  double L_J = 0.0;
  double C_nu = 0.0;       // larger of the two variants below
  double C_nu_half = 0.0;  // with the leading 1/2
  double C_nu_full = 0.0;  // without it
  double kappa_hat = 1.0;  // maxed over the sampled policy grid
  double rho_hat = 0.0;
  double empirical_max_ratio = 0.0;
  bool bound_holds = false;
};
/**
 * Gradient-smoothness constant L_J = (r_max/(1-gamma)) (4 C_nu C_psi + L_psi)
 * with C_nu built from restart-chain mixing constants maximized over sampled
 * policies, plus an empirical sweep of ||grad J(w) - grad J(w')|| / ||w - w'||
 * over num_pairs random parameter pairs (half local perturbations, half
 * independent draws).
 */
LipschitzReport lipschitz_constants(const FiniteMdp& mdp,
                                    const PolicyFeatures& features,
                                    std::uint64_t seed, int num_pairs = 200);

struct FisherGapReport {
  std::vector<double> lambdas;
  std::vector<double> gaps;  // ||(F + lambda I)^-1 g - F^+ g|| per lambda
  double slope = 0.0;        // log-log fit over the lambda grid
  double r2 = 0.0;
  double projection_residual = 0.0;  // ||(I - F F^+) g|| / ||g||
  bool in_column_space = false;      // residual <= 1e-8
};
FisherGapReport fisher_direction_gap(const FiniteMdp& mdp,
                                     const SoftmaxPolicy& policy,
                                     const std::vector<double>& lambdas);

/** Every exact quantity the run-level checks consume, for one (MDP, w, phi). */
struct OracleSolution {
  Eigen::VectorXd mu;   // stationary distribution of the raw state chain
  Eigen::MatrixXd nu;   // visitation measure over (s, a)
  Eigen::VectorXd V;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd Adv;
  double J = 0.0;
  Eigen::VectorXd grad_J;
  Eigen::MatrixXd fisher;
  Eigen::VectorXd td_star;
  Eigen::MatrixXd A_pi;
  Eigen::VectorXd b_pi;
  double lambda_A = 0.0;
  double kappa_hat = 1.0;  // mixing of the raw state chain under this policy
  double rho_hat = 0.0;
  double zeta_critic = 0.0;
  double zeta_actor = 0.0;
};

OracleSolution oracle_solution(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                               const Eigen::MatrixXd& phi);

/** JSON-serialized OracleSolution report. */
std::string oracle_dump(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                        const Eigen::MatrixXd& phi);

}  // namespace mbac
