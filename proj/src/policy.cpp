#include "mbac/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace mbac {

PolicyFeatures PolicyFeatures::tabular(int num_states, int num_actions) {
  PolicyFeatures f;
  f.num_states = num_states;
  f.num_actions = num_actions;
  f.dim = num_states * num_actions;
  f.x = Eigen::MatrixXd::Identity(f.dim, f.dim);
  f.max_feature_norm = 1.0;
  return f;
}

PolicyFeatures PolicyFeatures::from_table(Eigen::MatrixXd table, int num_states,
                                          int num_actions) {
  if (table.rows() != static_cast<long>(num_states) * num_actions)
    throw std::invalid_argument("PolicyFeatures: table must have S*A rows");
  if (!table.allFinite())
    throw std::invalid_argument("PolicyFeatures: non-finite feature entry");
  PolicyFeatures f;
  f.num_states = num_states;
  f.num_actions = num_actions;
  f.dim = static_cast<int>(table.cols());
  double max_norm = 0.0;
  for (long i = 0; i < table.rows(); ++i)
    max_norm = std::max(max_norm, table.row(i).norm());
  if (max_norm > 1.0) table /= max_norm;
  f.x = std::move(table);
  f.max_feature_norm = 0.0;
  for (long i = 0; i < f.x.rows(); ++i)
    f.max_feature_norm = std::max(f.max_feature_norm, f.x.row(i).norm());
  return f;
}

double analytic_score_bound(const PolicyFeatures& f) {
  return 2.0 * f.max_feature_norm;
}

double analytic_score_lipschitz(const PolicyFeatures& f) {
  return 2.0 * f.max_feature_norm * f.max_feature_norm;
}

double analytic_tv_lipschitz(const PolicyFeatures& f) {
  return f.max_feature_norm;
}

SoftmaxPolicy::SoftmaxPolicy(std::shared_ptr<const PolicyFeatures> f,
                             Eigen::VectorXd params)
    : features(std::move(f)), w(std::move(params)) {
  if (!features) throw std::invalid_argument("SoftmaxPolicy: null features");
  if (w.size() != features->dim)
    throw std::invalid_argument("SoftmaxPolicy: parameter dimension mismatch");
}

Eigen::VectorXd action_probs(const SoftmaxPolicy& policy, int s) {
  const PolicyFeatures& f = *policy.features;
  if (s < 0 || s >= f.num_states)
    throw std::out_of_range("action_probs: state index out of range");
  const int A = f.num_actions;
  Eigen::VectorXd logits =
      f.x.middleRows(static_cast<long>(s) * A, A) * policy.w;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd probs = logits.array().exp();
  probs /= probs.sum();
  return probs;
}

Eigen::VectorXd score(const SoftmaxPolicy& policy, int s, int a) {
  const PolicyFeatures& f = *policy.features;
  if (a < 0 || a >= f.num_actions)
    throw std::out_of_range("score: action index out of range");
  Eigen::VectorXd probs = action_probs(policy, s);
  const int A = f.num_actions;
  Eigen::RowVectorXd mean =
      probs.transpose() * f.x.middleRows(static_cast<long>(s) * A, A);
  return (f.row(s, a) - mean).transpose();
}

int sample_action(const SoftmaxPolicy& policy, PathCursor& cursor, int s) {
  Eigen::VectorXd probs = action_probs(policy, s);
  return cursor.rng.categorical(probs.data(), static_cast<int>(probs.size()));
}

double tv_distance(const SoftmaxPolicy& a, const SoftmaxPolicy& b, int s) {
  if (a.features.get() != b.features.get() &&
      (a.features->x.rows() != b.features->x.rows() ||
       a.features->x.cols() != b.features->x.cols() ||
       a.features->x != b.features->x))
    throw std::invalid_argument("tv_distance: policies use different feature sets");
  Eigen::VectorXd pa = action_probs(a, s);
  Eigen::VectorXd pb = action_probs(b, s);
  return 0.5 * (pa - pb).lpNorm<1>();
}

FisherEstimate fisher_estimate(const SoftmaxPolicy& policy,
                               const std::vector<TransitionSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("fisher_estimate: empty batch");
  const int d = policy.features->dim;
  FisherEstimate est;
  est.F = Eigen::MatrixXd::Zero(d, d);
  est.batch_size = static_cast<int>(batch.size());
  for (const TransitionSample& ts : batch) {
    Eigen::VectorXd psi = score(policy, ts.state, ts.action);
    est.F.noalias() += psi * psi.transpose();
  }
  est.F /= static_cast<double>(est.batch_size);
  return est;
}

Assumption1Constants estimate_assumption1_constants(
    const PolicyFeatures& features,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& grid) {
  if (grid.empty())
    throw std::invalid_argument("estimate_assumption1_constants: empty grid");
  auto shared = std::make_shared<const PolicyFeatures>(features);

  Assumption1Constants out;
  out.C_psi = analytic_score_bound(features);
  for (const auto& [w1, w2] : grid) {
    double dist = (w1 - w2).norm();
    if (dist == 0.0) continue;  // 0/0 ratio carries no information
    SoftmaxPolicy p1(shared, w1), p2(shared, w2);
    for (int s = 0; s < features.num_states; ++s) {
      out.C_pi_est = std::max(out.C_pi_est, tv_distance(p1, p2, s) / dist);
      for (int a = 0; a < features.num_actions; ++a) {
        double dpsi = (score(p1, s, a) - score(p2, s, a)).norm();
        out.L_psi_est = std::max(out.L_psi_est, dpsi / dist);
      }
    }
  }
  return out;
}

}  // namespace mbac
