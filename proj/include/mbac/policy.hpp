#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "mbac/mdp.hpp"

namespace mbac {

/**
 * State-action feature table x(s, a) in R^d1, stored as an (S*A) x d1 matrix
 * with row index s * A + a. Construction rescales the whole table once so
 * that max ||x(s, a)||_2 <= 1; the achieved maximum norm is kept because the
 * softmax smoothness constants are derived from it.
 */
struct PolicyFeatures {
  Eigen::MatrixXd x;
  int num_states = 0;
  int num_actions = 0;
  int dim = 0;
  double max_feature_norm = 0.0;

  static PolicyFeatures tabular(int num_states, int num_actions);
  static PolicyFeatures from_table(Eigen::MatrixXd table, int num_states,
                                   int num_actions);

  Eigen::RowVectorXd row(int s, int a) const { return x.row(s * num_actions + a); }
};

/** Largest possible score norm for this feature set: 2 * max ||x||. */
double analytic_score_bound(const PolicyFeatures& f);
/** Score Lipschitz constant in the parameters: 2 * max ||x||^2. */
double analytic_score_lipschitz(const PolicyFeatures& f);
/** Total-variation Lipschitz constant of w -> pi_w(.|s): max ||x||. */
double analytic_tv_lipschitz(const PolicyFeatures& f);

/**
 * Boltzmann policy pi_w(a|s) proportional to exp(x(s, a) . w). Immutable per
 * parameter vector; features are shared by reference across parameter values.
 */
struct SoftmaxPolicy {
  std::shared_ptr<const PolicyFeatures> features;
  Eigen::VectorXd w;

  SoftmaxPolicy(std::shared_ptr<const PolicyFeatures> f, Eigen::VectorXd params);

  /** Copy sharing the same features with new parameters. */
  SoftmaxPolicy with_params(Eigen::VectorXd params) const {
    return SoftmaxPolicy(features, std::move(params));
  }
};

/** Action distribution at state s, computed with max-subtracted logits. */
Eigen::VectorXd action_probs(const SoftmaxPolicy& policy, int s);

/** Score psi_w(s, a) = x(s, a) - sum_a' pi_w(a'|s) x(s, a'). */
Eigen::VectorXd score(const SoftmaxPolicy& policy, int s, int a);

/** Draws an action by inverse CDF on a single uniform from the cursor. */
int sample_action(const SoftmaxPolicy& policy, PathCursor& cursor, int s);

/**
 * Total-variation distance between the two policies' action distributions at
 * state s. Requires both policies to share one feature set.
 */
double tv_distance(const SoftmaxPolicy& a, const SoftmaxPolicy& b, int s);

/** Sampled Fisher matrix (1/B) sum psi psi^T over a transition batch. */
struct FisherEstimate {
  Eigen::MatrixXd F;
  int batch_size = 0;
};

FisherEstimate fisher_estimate(const SoftmaxPolicy& policy,
                               const std::vector<TransitionSample>& batch);

/**
 * Smoothness constants of the softmax class: the exact score bound C_psi and
 * sweep-based lower estimates of the score Lipschitz constant and the
 * total-variation Lipschitz constant over the supplied parameter pairs.
 */
struct Assumption1Constants {
  double C_psi = 0.0;    // exact: 2 * max ||x||
  double L_psi_est = 0.0;
  double C_pi_est = 0.0;
};

Assumption1Constants estimate_assumption1_constants(
    const PolicyFeatures& features,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& grid);

}  // namespace mbac
