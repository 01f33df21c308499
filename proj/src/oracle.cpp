#include "mbac/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mbac/stats.hpp"

namespace mbac {

namespace {

Eigen::MatrixXd policy_matrix(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  Eigen::MatrixXd pi(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) pi.row(s) = action_probs(policy, s).transpose();
  return pi;
}

}  // namespace

Eigen::MatrixXd policy_kernel(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  Eigen::MatrixXd pi = policy_matrix(mdp, policy);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a)
    K += pi.col(a).asDiagonal() * mdp.transition[a];
  return K;
}

Eigen::MatrixXd visitation_state_chain(const FiniteMdp& mdp,
                                       const SoftmaxPolicy& policy) {
  Eigen::MatrixXd K = policy_kernel(mdp, policy);
  return mdp.discount * K +
         (1.0 - mdp.discount) * Eigen::VectorXd::Ones(mdp.num_states) *
             mdp.init_dist.transpose();
}

Eigen::MatrixXd state_action_chain(const FiniteMdp& mdp,
                                   const SoftmaxPolicy& policy,
                                   KernelChoice kernel) {
  const int S = mdp.num_states, A = mdp.num_actions;
  Eigen::MatrixXd pi = policy_matrix(mdp, policy);
  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(S * A, S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      Eigen::VectorXd next_state = mdp.transition[a].row(s);
      if (kernel == KernelChoice::Visitation)
        next_state = mdp.discount * next_state + (1.0 - mdp.discount) * mdp.init_dist;
      for (int sn = 0; sn < S; ++sn)
        for (int an = 0; an < A; ++an)
          chain(s * A + a, sn * A + an) = next_state[sn] * pi(sn, an);
    }
  return chain;
}

Eigen::VectorXd mean_reward(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  Eigen::MatrixXd pi = policy_matrix(mdp, policy);
  Eigen::VectorXd r_bar = Eigen::VectorXd::Zero(mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a)
    r_bar += pi.col(a).cwiseProduct(
        (mdp.transition[a].cwiseProduct(mdp.reward[a])).rowwise().sum());
  return r_bar;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain) {
  const long n = chain.rows();
  if (n == 0 || chain.cols() != n)
    throw std::invalid_argument("stationary_distribution: chain must be square");
  for (long s = 0; s < n; ++s)
    if (std::abs(chain.row(s).sum() - 1.0) > 1e-9 || chain.row(s).minCoeff() < -1e-12)
      throw std::invalid_argument("stationary_distribution: chain is not row-stochastic");

  Eigen::EigenSolver<Eigen::MatrixXd> eig(chain);
  int unit_count = 0;
  for (long i = 0; i < n; ++i)
    if (std::abs(eig.eigenvalues()[i] - std::complex<double>(1.0, 0.0)) < 1e-8)
      ++unit_count;
  if (unit_count != 1)
    throw std::runtime_error(
        "stationary_distribution: eigenvalue 1 has multiplicity " +
        std::to_string(unit_count) + " (chain reducible or degenerate)");

  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = chain.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.bottomRows(1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  Eigen::VectorXd mu = A.colPivHouseholderQr().solve(rhs);

  double residual = (chain.transpose() * mu - mu).lpNorm<Eigen::Infinity>();
  if (residual > 1e-10)
    throw std::runtime_error("stationary_distribution: residual " +
                             std::to_string(residual) + " exceeds 1e-10");
  return mu;
}

Eigen::VectorXd value_function(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  const int S = mdp.num_states;
  Eigen::MatrixXd K = policy_kernel(mdp, policy);
  Eigen::VectorXd r_bar = mean_reward(mdp, policy);
  return (Eigen::MatrixXd::Identity(S, S) - mdp.discount * K)
      .partialPivLu()
      .solve(r_bar);
}

QAdvantage q_and_advantage(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  const int S = mdp.num_states, A = mdp.num_actions;
  Eigen::VectorXd V = value_function(mdp, policy);
  QAdvantage out;
  out.Q.resize(S, A);
  for (int a = 0; a < A; ++a)
    out.Q.col(a) = (mdp.transition[a].cwiseProduct(mdp.reward[a])).rowwise().sum() +
                   mdp.discount * mdp.transition[a] * V;
  out.Adv = out.Q.colwise() - V;
  return out;
}

VisitationMeasure visitation_measure(const FiniteMdp& mdp,
                                     const SoftmaxPolicy& policy) {
  const int S = mdp.num_states, A = mdp.num_actions;
  Eigen::MatrixXd K = policy_kernel(mdp, policy);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - mdp.discount * K;
  VisitationMeasure out;
  out.d = (1.0 - mdp.discount) * M.transpose().partialPivLu().solve(mdp.init_dist);
  Eigen::MatrixXd pi = policy_matrix(mdp, policy);
  out.nu = out.d.asDiagonal() * pi;
  return out;
}

double visitation_two_construction_gap(const FiniteMdp& mdp,
                                       const SoftmaxPolicy& policy) {
  VisitationMeasure vm = visitation_measure(mdp, policy);
  Eigen::VectorXd stat =
      stationary_distribution(state_action_chain(mdp, policy, KernelChoice::Visitation));
  double gap = 0.0;
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      gap = std::max(gap, std::abs(vm.nu(s, a) - stat[s * mdp.num_actions + a]));
  return gap;
}

double objective(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  return mdp.init_dist.dot(value_function(mdp, policy));
}

Eigen::VectorXd exact_gradient(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  VisitationMeasure vm = visitation_measure(mdp, policy);
  QAdvantage qa = q_and_advantage(mdp, policy);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(policy.features->dim);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      g += vm.nu(s, a) * qa.Adv(s, a) * score(policy, s, a);
  return g / (1.0 - mdp.discount);
}

Eigen::MatrixXd exact_fisher(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  VisitationMeasure vm = visitation_measure(mdp, policy);
  const int d = policy.features->dim;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      Eigen::VectorXd psi = score(policy, s, a);
      F.noalias() += vm.nu(s, a) * psi * psi.transpose();
    }
  return F;
}

TdFixedPoint td_fixed_point(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                            const Eigen::MatrixXd& phi) {
  if (phi.rows() != mdp.num_states)
    throw std::invalid_argument("td_fixed_point: phi must have one row per state");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
  if (svd.singularValues().minCoeff() <= 1e-10)
    throw std::invalid_argument("td_fixed_point: critic features are rank deficient");

  Eigen::VectorXd mu = stationary_distribution(policy_kernel(mdp, policy));
  Eigen::MatrixXd K = policy_kernel(mdp, policy);
  Eigen::VectorXd r_bar = mean_reward(mdp, policy);

  TdFixedPoint out;
  out.A = phi.transpose() * mu.asDiagonal() * (mdp.discount * K * phi - phi);
  out.b = phi.transpose() * mu.asDiagonal() * r_bar;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.A);
  if (!lu.isInvertible())
    throw std::runtime_error("td_fixed_point: mean update matrix is singular");
  out.theta_star = -lu.solve(out.b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (out.A + out.A.transpose()));
  out.lambda_A = -eig.eigenvalues().maxCoeff();
  return out;
}

OptimalSolution optimal_value(const FiniteMdp& mdp) {
  const int S = mdp.num_states, A = mdp.num_actions;
  Eigen::MatrixXd expected_r(S, A);
  for (int a = 0; a < A; ++a)
    expected_r.col(a) =
        (mdp.transition[a].cwiseProduct(mdp.reward[a])).rowwise().sum();

  OptimalSolution out;
  out.V_star = Eigen::VectorXd::Zero(S);
  const double tol = 1e-12 * (1.0 - mdp.discount) / mdp.discount;
  for (long iter = 0; iter < 1000000; ++iter) {
    Eigen::MatrixXd Q(S, A);
    for (int a = 0; a < A; ++a)
      Q.col(a) = expected_r.col(a) + mdp.discount * mdp.transition[a] * out.V_star;
    Eigen::VectorXd V_next = Q.rowwise().maxCoeff();
    double delta = (V_next - out.V_star).lpNorm<Eigen::Infinity>();
    out.V_star = V_next;
    if (delta < tol) break;
  }

  Eigen::MatrixXd Q(S, A);
  for (int a = 0; a < A; ++a)
    Q.col(a) = expected_r.col(a) + mdp.discount * mdp.transition[a] * out.V_star;
  out.greedy_actions.assign(S, 0);
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int a = 1; a < A; ++a)
      if (Q(s, a) > Q(s, best)) best = a;  // strict: ties keep the lowest index
    out.greedy_actions[s] = best;
  }
  out.J_star = mdp.init_dist.dot(out.V_star);
  return out;
}

MixingConstants mixing_constants(const Eigen::MatrixXd& chain) {
  const long n = chain.rows();
  Eigen::VectorXd mu = stationary_distribution(chain);

  Eigen::EigenSolver<Eigen::MatrixXd> eig(chain);
  std::vector<double> moduli;
  for (long i = 0; i < n; ++i) moduli.push_back(std::abs(eig.eigenvalues()[i]));
  std::sort(moduli.begin(), moduli.end(), std::greater<double>());
  double rho = (n > 1) ? moduli[1] : 0.0;
  if (rho >= 1.0 - 1e-10)
    throw std::runtime_error("mixing_constants: chain is not ergodic (SLEM >= 1)");
  if (rho < 1e-14) rho = 0.0;

  MixingConstants out;
  out.rho_hat = rho;

  auto max_tv = [&](const Eigen::MatrixXd& Kt) {
    double worst = 0.0;
    for (long s = 0; s < n; ++s)
      worst = std::max(worst, 0.5 * (Kt.row(s).transpose() - mu).lpNorm<1>());
    return worst;
  };

  // log-spaced grid t = 0, 1, 2, 4, 8, ... until total variation dies out
  double kappa = 1.0;
  double tv0 = 0.0;
  for (long s = 0; s < n; ++s) {
    Eigen::VectorXd delta = -mu;
    delta[s] += 1.0;
    tv0 = std::max(tv0, 0.5 * delta.lpNorm<1>());
  }
  kappa = std::max(kappa, tv0);  // t = 0 term, rho^0 = 1

  Eigen::MatrixXd Kt = chain;
  long t = 1;
  for (int step = 0; step < 64; ++step) {
    double tv = max_tv(Kt);
    // once TV reaches the roundoff floor the ratio against rho^t is noise
    if (tv < 1e-12) break;
    if (rho > 0.0) {
      double bound = std::pow(rho, static_cast<double>(t));
      if (bound < 1e-300) break;
      kappa = std::max(kappa, tv / bound);
    }
    Kt = Kt * Kt;  // doubles t on the log-spaced grid
    t *= 2;
  }
  out.kappa_hat = kappa;
  return out;
}

double critic_approx_error(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                           const Eigen::MatrixXd& phi) {
  TdFixedPoint fp = td_fixed_point(mdp, policy, phi);
  Eigen::VectorXd V = value_function(mdp, policy);
  VisitationMeasure vm = visitation_measure(mdp, policy);
  double err = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double gap = V[s] - phi.row(s).dot(fp.theta_star);
    for (int a = 0; a < mdp.num_actions; ++a) err += vm.nu(s, a) * gap * gap;
  }
  return err;
}

double critic_approx_error_max(const FiniteMdp& mdp, const PolicyFeatures& features,
                               const Eigen::MatrixXd& phi,
                               const std::vector<Eigen::VectorXd>& params_grid) {
  if (params_grid.empty())
    throw std::invalid_argument("critic_approx_error_max: empty parameter grid");
  auto shared = std::make_shared<const PolicyFeatures>(features);
  double worst = 0.0;
  for (const auto& w : params_grid)
    worst = std::max(worst, critic_approx_error(mdp, SoftmaxPolicy(shared, w), phi));
  return worst;
}

double actor_approx_error(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  VisitationMeasure vm = visitation_measure(mdp, policy);
  QAdvantage qa = q_and_advantage(mdp, policy);
  const int d = policy.features->dim;
  const int rows = mdp.num_states * mdp.num_actions;
  Eigen::MatrixXd X(rows, d);
  Eigen::VectorXd y(rows);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      double wgt = std::sqrt(std::max(vm.nu(s, a), 0.0));
      X.row(s * mdp.num_actions + a) = wgt * score(policy, s, a).transpose();
      y[s * mdp.num_actions + a] = wgt * qa.Adv(s, a);
    }
  Eigen::VectorXd p = X.completeOrthogonalDecomposition().solve(y);
  return (X * p - y).squaredNorm();
}

LipschitzReport lipschitz_constants(const FiniteMdp& mdp,
                                    const PolicyFeatures& features,
                                    std::uint64_t seed, int num_pairs) {
  if (num_pairs < 2) throw std::invalid_argument("lipschitz_constants: num_pairs >= 2");
  const int d = features.dim;
  auto shared = std::make_shared<const PolicyFeatures>(features);
  DetRng rng(seed);

  auto gaussian = [&rng, d]() {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
  };

  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  pairs.reserve(num_pairs);
  for (int i = 0; i < num_pairs; ++i) {
    Eigen::VectorXd w1 = gaussian();
    Eigen::VectorXd w2 =
        (i < num_pairs / 2) ? Eigen::VectorXd(w1 + 0.01 * gaussian()) : gaussian();
    pairs.emplace_back(std::move(w1), std::move(w2));
  }

  LipschitzReport out;

  // Mixing constants of the restart state-action chain, maximized over the
  // uniform policy and every sampled parameter vector.
  std::vector<Eigen::VectorXd> grid;
  grid.push_back(Eigen::VectorXd::Zero(d));
  for (const auto& [w1, w2] : pairs) {
    grid.push_back(w1);
    grid.push_back(w2);
  }
  for (const auto& w : grid) {
    SoftmaxPolicy pol(shared, w);
    MixingConstants mc =
        mixing_constants(state_action_chain(mdp, pol, KernelChoice::Visitation));
    out.kappa_hat = std::max(out.kappa_hat, mc.kappa_hat);
    out.rho_hat = std::max(out.rho_hat, mc.rho_hat);
  }

  double ceil_term = 0.0;
  if (out.rho_hat > 0.0 && out.kappa_hat > 1.0)
    ceil_term = std::ceil(std::log(out.kappa_hat) / -std::log(out.rho_hat));
  double C_pi = analytic_tv_lipschitz(features);
  double factor = 1.0 + ceil_term + 1.0 / (1.0 - out.rho_hat);
  out.C_nu_half = 0.5 * C_pi * factor;
  out.C_nu_full = C_pi * factor;
  out.C_nu = std::max(out.C_nu_half, out.C_nu_full);

  double C_psi = analytic_score_bound(features);
  double L_psi = analytic_score_lipschitz(features);
  out.L_J = mdp.r_max / (1.0 - mdp.discount) * (4.0 * out.C_nu * C_psi + L_psi);

  for (const auto& [w1, w2] : pairs) {
    double dist = (w1 - w2).norm();
    if (dist == 0.0) continue;
    Eigen::VectorXd g1 = exact_gradient(mdp, SoftmaxPolicy(shared, w1));
    Eigen::VectorXd g2 = exact_gradient(mdp, SoftmaxPolicy(shared, w2));
    out.empirical_max_ratio = std::max(out.empirical_max_ratio, (g1 - g2).norm() / dist);
  }
  out.bound_holds = out.empirical_max_ratio <= out.L_J;
  return out;
}

FisherGapReport fisher_direction_gap(const FiniteMdp& mdp,
                                     const SoftmaxPolicy& policy,
                                     const std::vector<double>& lambdas) {
  if (lambdas.empty())
    throw std::invalid_argument("fisher_direction_gap: empty lambda grid");
  Eigen::MatrixXd F = exact_fisher(mdp, policy);
  Eigen::VectorXd g = exact_gradient(mdp, policy);
  const int d = static_cast<int>(g.size());

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(F);
  Eigen::VectorXd pseudo = cod.solve(g);

  FisherGapReport out;
  double gnorm = g.norm();
  out.projection_residual = (gnorm > 0.0) ? (F * pseudo - g).norm() / gnorm : 0.0;
  out.in_column_space = out.projection_residual <= 1e-8;

  out.lambdas = lambdas;
  out.gaps.reserve(lambdas.size());
  for (double lam : lambdas) {
    if (lam <= 0.0)
      throw std::invalid_argument("fisher_direction_gap: lambda must be positive");
    Eigen::VectorXd u =
        (F + lam * Eigen::MatrixXd::Identity(d, d)).ldlt().solve(g);
    out.gaps.push_back((u - pseudo).norm());
  }
  if (lambdas.size() >= 2) {
    LinearFit fit = fit_loglog(out.lambdas, out.gaps);
    out.slope = fit.slope;
    out.r2 = fit.r2;
  }
  return out;
}

OracleSolution oracle_solution(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                               const Eigen::MatrixXd& phi) {
  OracleSolution sol;
  sol.mu = stationary_distribution(policy_kernel(mdp, policy));
  VisitationMeasure vm = visitation_measure(mdp, policy);
  sol.nu = vm.nu;
  sol.V = value_function(mdp, policy);
  QAdvantage qa = q_and_advantage(mdp, policy);
  sol.Q = qa.Q;
  sol.Adv = qa.Adv;
  sol.J = mdp.init_dist.dot(sol.V);
  sol.grad_J = exact_gradient(mdp, policy);
  sol.fisher = exact_fisher(mdp, policy);
  TdFixedPoint fp = td_fixed_point(mdp, policy, phi);
  sol.td_star = fp.theta_star;
  sol.A_pi = fp.A;
  sol.b_pi = fp.b;
  sol.lambda_A = fp.lambda_A;
  MixingConstants mc = mixing_constants(policy_kernel(mdp, policy));
  sol.kappa_hat = mc.kappa_hat;
  sol.rho_hat = mc.rho_hat;
  sol.zeta_critic = critic_approx_error(mdp, policy, phi);
  sol.zeta_actor = actor_approx_error(mdp, policy);
  return sol;
}

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (long i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string oracle_dump(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                        const Eigen::MatrixXd& phi) {
  OracleSolution sol = oracle_solution(mdp, policy, phi);
  nlohmann::json doc;
  doc["mu"] = vec_to_json(sol.mu);
  doc["nu"] = mat_to_json(sol.nu);
  doc["V"] = vec_to_json(sol.V);
  doc["Q"] = mat_to_json(sol.Q);
  doc["Adv"] = mat_to_json(sol.Adv);
  doc["J"] = sol.J;
  doc["grad_J"] = vec_to_json(sol.grad_J);
  doc["fisher"] = mat_to_json(sol.fisher);
  doc["td_star"] = vec_to_json(sol.td_star);
  doc["A_pi"] = mat_to_json(sol.A_pi);
  doc["b_pi"] = vec_to_json(sol.b_pi);
  doc["lambda_A"] = sol.lambda_A;
  doc["kappa_hat"] = sol.kappa_hat;
  doc["rho_hat"] = sol.rho_hat;
  doc["zeta_critic"] = sol.zeta_critic;
  doc["zeta_actor"] = sol.zeta_actor;
  doc["params"] = vec_to_json(policy.w);
  return doc.dump(2);
}

}  // namespace mbac
