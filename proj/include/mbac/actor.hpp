#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "mbac/critic.hpp"
#include "mbac/mdp.hpp"
#include "mbac/policy.hpp"

namespace mbac {

enum class ActorVariant { Ac, Nac };

/**
 * Configuration of one actor-critic run. The critic phase of every outer
 * iteration runs mini-batch TD (stepsize beta, T_c iterations of batch M) on
 * the raw kernel; the actor phase draws B samples on the restart-mixture
 * kernel. Both phases advance the same sample path.
 */
struct ActorConfig {
  ActorVariant variant = ActorVariant::Ac;
  double alpha = 0.01;   // actor stepsize
  int B = 64;            // actor batch size
  double lambda = 1e-2;  // Fisher damping (Nac)
  int T = 100;           // outer iterations
  double beta = 0.5;     // critic stepsize
  int T_c = 50;          // critic iterations per outer step
  int M = 16;            // critic batch size
  Eigen::VectorXd w0;    // empty = zero initialization
  std::uint64_t seed = 0;
  bool warm_start_critic = false;  // default re-initializes theta to 0 each step
  // TD errors in the actor batch use the realized restart-mixture successor,
  // restarts included. This switch substitutes an independently drawn raw
  // successor on restart steps only.
  bool restart_uses_raw_successor = false;
};

/** Per-iteration record; metrics are evaluated at w_t before the t-th update. */
struct TraceRow {
  int t = 0;                    // 1-based outer iteration
  double grad_norm_sq = 0.0;    // ||grad J(w_t)||^2, exact
  double J_w = 0.0;             // J(w_t), exact
  double gap = 0.0;             // J* - J(w_t)
  double theta_err_sq = 0.0;    // ||theta_t - theta*(w_t)||^2 after the critic phase
  double zeta_critic = 0.0;     // value-representation error at w_t
  double zeta_actor = 0.0;      // advantage-representation error at w_t
  double grad_est_err_sq = 0.0; // ||v_t - E[v | w_t, theta_t]||^2
  std::uint64_t cumulative_samples = 0;
  std::int64_t wallclock_ns = 0;
};

struct RunTrace {
  std::vector<TraceRow> rows;   // length T
  Eigen::VectorXd w_final;      // w_T after all updates
  int T_hat = 0;                // uniform draw from {1, ..., T}
  double gap_at_T_hat = 0.0;    // gap of the sampled iterate w_{T_hat - 1}
  double avg_gap = 0.0;         // (1/T) sum_t gap(w_t)
  double avg_grad_norm_sq = 0.0;
  std::uint64_t total_samples = 0;
  int exit_state = 0;
  int path_breaks = 0;          // phase-boundary continuity violations (0)
};

/**
 * v_t = (1/B) sum_i delta_theta(s_i, a_i, s_i') psi_w(s_i, a_i) over a batch
 * drawn on the restart-mixture kernel, advancing the cursor. When batch_out
 * is non-null the raw samples are appended for Fisher estimation. Throws on
 * an empty batch request.
 */
Eigen::VectorXd actor_gradient_estimate(const FiniteMdp& mdp,
                                        const SoftmaxPolicy& policy,
                                        const CriticModel& critic, int B,
                                        PathCursor& cursor,
                                        bool restart_uses_raw_successor = false,
                                        std::vector<TransitionSample>* batch_out = nullptr);

/** w_{t+1} = w_t + alpha v_t. */
Eigen::VectorXd ac_step(const Eigen::VectorXd& w, const Eigen::VectorXd& v,
                        double alpha);

/**
 * w_{t+1} = w_t + alpha (F + lambda I)^-1 v by LDLT solve; requires
 * lambda > 0 and guards the solve with a residual check.
 */
Eigen::VectorXd nac_step(const Eigen::VectorXd& w, const FisherEstimate& fisher,
                         double lambda, const Eigen::VectorXd& v, double alpha);

/**
 * Full actor-critic run on one continuing sample path. The initial state is
 * drawn from xi, every critic and actor phase inherits the cursor from the
 * previous phase, exact per-iteration metrics come from the oracle, and the
 * output index T_hat is drawn after the loop from the same stream.
 */
RunTrace run(const FiniteMdp& mdp, std::shared_ptr<const PolicyFeatures> features,
             const Eigen::MatrixXd& critic_phi, const ActorConfig& config);

/** Everything prescribe_actor_hyperparams derives, plus the inputs it used. */
struct ActorPrescription {
  double alpha = 0.0;
  long long B = 0;
  long long T = 0;
  double lambda = 0.0;      // Nac damping after the lambda_min floor
  double critic_eps = 0.0;  // per-iteration critic MSE target
  SaPrescription critic;    // (beta, T_c, M) meeting critic_eps at w0
  double L_J = 0.0;
  double zeta_critic = 0.0;
  double kappa_hat = 1.0;
  double rho_hat = 0.0;
  double R_theta = 0.0;
};

/**
 * Theorem-form hyperparameters for a target accuracy eps.
 *
 * AC: alpha = 1/(4 L_J), B >= 216 (r_max + 2 R_theta)^2 mix / eps,
 * T >= 48 L_J r_max / ((1-gamma) eps), critic target eps / 108.
 *
 * NAC: lambda = sqrt(zeta_critic) floored at lambda_min;
 * alpha = lambda^2 / (4 L_J (1 + lambda));
 * T >= max{16 L_J (1+lambda) / (eps (1-gamma) lambda^2),
 *          16 r_max L_psi (1+lambda) / (eps (1-gamma)^2 lambda^2)};
 * B >= max of the three variance clauses; critic target
 * min{zeta_critic / 64, eps lambda^2 (1-gamma) L_J / (324 L_psi (1+lambda))}.
 * In the exact-representation case zeta_critic = 0 the two clauses that
 * divide by it use the floored lambda^2 in its place.
 *
 * mix abbreviates [1 + (kappa - 1) rho] / (1 - rho) with the mixing constants
 * of the restart-mixture state-action chain at w0; R_theta = 2 ||theta*_{w0}||;
 * L_J comes from lipschitz_constants.
 */
ActorPrescription prescribe_actor_hyperparams(
    const FiniteMdp& mdp, std::shared_ptr<const PolicyFeatures> features,
    const Eigen::MatrixXd& critic_phi, ActorVariant variant, double eps,
    double lambda_min = 1e-3, std::uint64_t seed = 0);

}  // namespace mbac
