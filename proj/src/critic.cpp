#include "mbac/critic.hpp"

#include <cmath>
#include <stdexcept>

#include "mbac/oracle.hpp"

namespace mbac {

namespace {
constexpr double kRankTol = 1e-10;

void check_full_rank(const Eigen::MatrixXd& phi) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
  if (svd.singularValues().minCoeff() <= kRankTol)
    throw std::invalid_argument("critic features must have full column rank");
}
}  // namespace

CriticModel::CriticModel(Eigen::MatrixXd phi_in) : phi(std::move(phi_in)) {
  if (phi.rows() < 1 || phi.cols() < 1)
    throw std::invalid_argument("critic feature matrix is empty");
  if (phi.cols() > phi.rows())
    throw std::invalid_argument("critic features are overcomplete (d2 > S)");
  double max_norm = 0.0;
  for (int s = 0; s < phi.rows(); ++s)
    max_norm = std::max(max_norm, phi.row(s).norm());
  if (max_norm > 1.0) phi /= max_norm;
  check_full_rank(phi);
  theta = Eigen::VectorXd::Zero(phi.cols());
}

CriticModel CriticModel::tabular(int num_states) {
  return CriticModel(Eigen::MatrixXd::Identity(num_states, num_states));
}

CriticModel CriticModel::random_features(int num_states, int dim,
                                         std::uint64_t seed) {
  DetRng rng(seed);
  Eigen::MatrixXd phi(num_states, dim);
  for (int s = 0; s < num_states; ++s)
    for (int j = 0; j < dim; ++j) phi(s, j) = rng.normal();
  for (int s = 0; s < num_states; ++s) phi.row(s) /= phi.row(s).norm();
  return CriticModel(std::move(phi));
}

double td_delta(const CriticModel& model, const TransitionSample& sample,
                double gamma) {
  const double v_next = model.phi.row(sample.next_state).dot(model.theta);
  const double v_cur = model.phi.row(sample.state).dot(model.theta);
  return sample.reward + gamma * v_next - v_cur;
}

LinearSaProblem make_matrix_sa_problem(Eigen::MatrixXd chain,
                                       std::vector<Eigen::MatrixXd> A_x,
                                       std::vector<Eigen::VectorXd> b_x) {
  const int N = static_cast<int>(A_x.size());
  if (N == 0 || static_cast<int>(b_x.size()) != N)
    throw std::invalid_argument("A_x and b_x must be non-empty and same length");
  if (chain.rows() != N || chain.cols() != N)
    throw std::invalid_argument("chain must be N x N for N noise states");
  const int d = static_cast<int>(A_x[0].rows());
  for (int x = 0; x < N; ++x) {
    if (A_x[x].rows() != d || A_x[x].cols() != d || b_x[x].size() != d)
      throw std::invalid_argument("inconsistent A_x / b_x dimensions");
  }

  LinearSaProblem problem;
  problem.dim = d;
  problem.A_x = std::move(A_x);
  problem.b_x = std::move(b_x);
  problem.chain = std::move(chain);

  const Eigen::VectorXd mu = stationary_distribution(problem.chain);
  problem.A_bar = Eigen::MatrixXd::Zero(d, d);
  problem.b_bar = Eigen::VectorXd::Zero(d);
  for (int x = 0; x < N; ++x) {
    problem.A_bar += mu[x] * problem.A_x[x];
    problem.b_bar += mu[x] * problem.b_x[x];
    problem.C_A = std::max(problem.C_A, problem.A_x[x].norm());
    problem.C_b = std::max(problem.C_b, problem.b_x[x].norm());
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(problem.A_bar);
  if (!lu.isInvertible())
    throw std::invalid_argument("stationary mean A_bar is singular");
  problem.theta_star = lu.solve(-problem.b_bar);

  Eigen::MatrixXd sym = 0.5 * (problem.A_bar + problem.A_bar.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  problem.lambda_A = -es.eigenvalues().maxCoeff();

  MixingConstants mix = mixing_constants(problem.chain);
  problem.kappa_hat = mix.kappa_hat;
  problem.rho_hat = mix.rho_hat;
  problem.R_theta = 2.0 * problem.theta_star.norm();
  return problem;
}

LinearSaProblem make_td_sa_problem(const FiniteMdp& mdp,
                                   const SoftmaxPolicy& policy,
                                   const CriticModel& model,
                                   bool with_constants) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int d = model.dim();
  const double gamma = mdp.discount;

  LinearSaProblem problem;
  problem.dim = d;
  problem.mdp = &mdp;
  problem.policy = &policy;
  problem.A_x.resize(static_cast<std::size_t>(S) * A * S);
  problem.b_x.resize(static_cast<std::size_t>(S) * A * S);
  for (int s = 0; s < S; ++s) {
    const Eigen::VectorXd phi_s = model.phi.row(s);
    for (int a = 0; a < A; ++a)
      for (int sn = 0; sn < S; ++sn) {
        const int x = (s * A + a) * S + sn;
        Eigen::VectorXd drift = gamma * model.phi.row(sn).transpose() - phi_s;
        problem.A_x[x] = phi_s * drift.transpose();
        problem.b_x[x] = mdp.r(s, a, sn) * phi_s;
      }
  }

  if (with_constants) {
    const Eigen::MatrixXd K = policy_kernel(mdp, policy);
    const Eigen::VectorXd mu = stationary_distribution(K);
    problem.A_bar = Eigen::MatrixXd::Zero(d, d);
    problem.b_bar = Eigen::VectorXd::Zero(d);
    for (int s = 0; s < S; ++s) {
      const Eigen::VectorXd pi_s = action_probs(policy, s);
      for (int a = 0; a < A; ++a)
        for (int sn = 0; sn < S; ++sn) {
          const double weight = mu[s] * pi_s[a] * mdp.p(s, a, sn);
          if (weight == 0.0 && mdp.p(s, a, sn) == 0.0) continue;
          const int x = (s * A + a) * S + sn;
          problem.A_bar += weight * problem.A_x[x];
          problem.b_bar += weight * problem.b_x[x];
          // bound constants cover every triple the path can visit
          problem.C_A = std::max(problem.C_A, problem.A_x[x].norm());
          problem.C_b = std::max(problem.C_b, problem.b_x[x].norm());
        }
    }
    TdFixedPoint fp = td_fixed_point(mdp, policy, model.phi);
    problem.theta_star = fp.theta_star;
    problem.lambda_A = fp.lambda_A;
    MixingConstants mix = mixing_constants(K);
    problem.kappa_hat = mix.kappa_hat;
    problem.rho_hat = mix.rho_hat;
    problem.R_theta = 2.0 * problem.theta_star.norm();
  }
  return problem;
}

namespace {

/**
 * Per-call sampling tables: contiguous row-major copies of the categorical
 * rows so the inner loop never touches strided Eigen storage. The copied
 * probabilities are the exact doubles step()/sample_action() would use, so
 * the draw sequence is bit-identical to stepping the path sample by sample.
 */
struct SamplerTables {
  int num_rows = 0;
  int row_len = 0;
  std::vector<double> rows;

  const double* row(int i) const { return rows.data() + i * row_len; }
};

SamplerTables chain_tables(const Eigen::MatrixXd& chain) {
  SamplerTables t;
  t.num_rows = static_cast<int>(chain.rows());
  t.row_len = static_cast<int>(chain.cols());
  t.rows.resize(static_cast<std::size_t>(t.num_rows) * t.row_len);
  for (int i = 0; i < t.num_rows; ++i)
    for (int j = 0; j < t.row_len; ++j)
      t.rows[static_cast<std::size_t>(i) * t.row_len + j] = chain(i, j);
  return t;
}

SamplerTables action_tables(const FiniteMdp& mdp, const SoftmaxPolicy& policy) {
  SamplerTables t;
  t.num_rows = mdp.num_states;
  t.row_len = mdp.num_actions;
  t.rows.resize(static_cast<std::size_t>(t.num_rows) * t.row_len);
  for (int s = 0; s < mdp.num_states; ++s) {
    Eigen::VectorXd probs = action_probs(policy, s);
    for (int a = 0; a < mdp.num_actions; ++a)
      t.rows[static_cast<std::size_t>(s) * t.row_len + a] = probs[a];
  }
  return t;
}

SamplerTables transition_tables(const FiniteMdp& mdp) {
  SamplerTables t;
  t.num_rows = mdp.num_states * mdp.num_actions;
  t.row_len = mdp.num_states;
  t.rows.resize(static_cast<std::size_t>(t.num_rows) * t.row_len);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      Eigen::VectorXd row = mdp.transition[a].row(s);
      for (int sn = 0; sn < mdp.num_states; ++sn)
        t.rows[static_cast<std::size_t>(s * mdp.num_actions + a) * t.row_len +
               sn] = row[sn];
    }
  return t;
}

/** Flattened copies of the per-state update data for the tight inner loop. */
struct UpdateTables {
  int d = 0;
  std::vector<double> A;  // per state: d*d block, column-major
  std::vector<double> b;  // per state: d entries
};

UpdateTables update_tables(const LinearSaProblem& p) {
  UpdateTables t;
  t.d = p.dim;
  const std::size_t n = p.A_x.size();
  t.A.resize(n * t.d * t.d);
  t.b.resize(n * t.d);
  for (std::size_t x = 0; x < n; ++x) {
    for (int j = 0; j < t.d; ++j)
      for (int i = 0; i < t.d; ++i)
        t.A[(x * t.d + j) * t.d + i] = p.A_x[x](i, j);
    for (int i = 0; i < t.d; ++i) t.b[x * t.d + i] = p.b_x[x][i];
  }
  return t;
}

}  // namespace

Eigen::VectorXd linear_sa(const LinearSaProblem& problem, double alpha, int K,
                          int M, SaCursor& cursor, Eigen::VectorXd theta0,
                          const Eigen::VectorXd* theta_star,
                          std::vector<double>* err_trace) {
  if (!(alpha > 0.0)) throw std::invalid_argument("linear_sa: alpha must be > 0");
  if (K < 1 || M < 1)
    throw std::invalid_argument("linear_sa: K and M must be >= 1");
  if (theta0.size() != problem.dim)
    throw std::invalid_argument("linear_sa: theta0 has wrong dimension");
  const bool mdp_backed = problem.mdp != nullptr;
  if (mdp_backed && (cursor.path == nullptr || problem.policy == nullptr))
    throw std::invalid_argument(
        "linear_sa: MDP-backed problem needs a path cursor and policy");
  if (!mdp_backed && problem.chain.rows() == 0)
    throw std::invalid_argument("linear_sa: matrix-backed problem has no chain");

  const int d = problem.dim;
  const UpdateTables upd = update_tables(problem);

  SamplerTables chain_t, act_t, trans_t;
  int S = 0, A = 0;
  if (mdp_backed) {
    act_t = action_tables(*problem.mdp, *problem.policy);
    trans_t = transition_tables(*problem.mdp);
    S = problem.mdp->num_states;
    A = problem.mdp->num_actions;
  } else {
    chain_t = chain_tables(problem.chain);
    if (cursor.state < 0 || cursor.state >= chain_t.num_rows)
      throw std::invalid_argument("linear_sa: cursor state out of range");
  }

  Eigen::VectorXd theta = std::move(theta0);
  Eigen::VectorXd acc(d);
  double* th = theta.data();
  double* ac = acc.data();

  for (int k = 0; k < K; ++k) {
    acc.setZero();
    for (int m = 0; m < M; ++m) {
      int x;
      if (mdp_backed) {
        PathCursor& pc = *cursor.path;
        const int s = pc.state;
        const int a = pc.rng.categorical(act_t.row(s), A);
        const int sn = pc.rng.categorical(trans_t.row(s * A + a), S);
        pc.state = sn;
        pc.samples_drawn += 1;
        x = (s * A + a) * S + sn;
      } else {
        x = cursor.state;
        cursor.state = cursor.rng.categorical(chain_t.row(x), chain_t.row_len);
      }
      cursor.samples_drawn += 1;

      const double* Ax = upd.A.data() + static_cast<std::size_t>(x) * d * d;
      const double* bx = upd.b.data() + static_cast<std::size_t>(x) * d;
      for (int i = 0; i < d; ++i) ac[i] += bx[i];
      for (int j = 0; j < d; ++j) {
        const double tj = th[j];
        const double* col = Ax + j * d;
        for (int i = 0; i < d; ++i) ac[i] += tj * col[i];
      }
    }
    const double scale = alpha / static_cast<double>(M);
    for (int i = 0; i < d; ++i) th[i] += scale * ac[i];
    if (theta_star != nullptr && err_trace != nullptr)
      err_trace->push_back((theta - *theta_star).squaredNorm());
  }
  return theta;
}

TdRunResult minibatch_td(const FiniteMdp& mdp, const SoftmaxPolicy& policy,
                         CriticModel& model, double beta, int T_c, int M,
                         PathCursor& cursor, const Eigen::VectorXd* theta_star) {
  LinearSaProblem problem = make_td_sa_problem(mdp, policy, model);
  SaCursor sa(cursor);

  TdRunResult result;
  std::vector<double>* trace =
      theta_star != nullptr ? &result.err_trace : nullptr;
  result.theta =
      linear_sa(problem, beta, T_c, M, sa, model.theta, theta_star, trace);
  model.theta = result.theta;
  result.exit_state = cursor.state;
  return result;
}

SaPrescription prescribe_sa_hyperparams(const LinearSaProblem& problem,
                                        double eps,
                                        const Eigen::VectorXd* theta0) {
  if (!(eps > 0.0))
    throw std::invalid_argument("prescribe_sa_hyperparams: eps must be > 0");
  if (!(problem.lambda_A > 0.0))
    throw std::invalid_argument(
        "prescribe_sa_hyperparams: lambda_A <= 0, the mean drift is not Hurwitz");
  if (problem.theta_star.size() != problem.dim)
    throw std::invalid_argument(
        "prescribe_sa_hyperparams: problem constants are not filled");

  const double lam = problem.lambda_A;
  SaPrescription out;
  out.alpha = std::min(lam / (8.0 * problem.C_A * problem.C_A), 4.0 / lam);

  Eigen::VectorXd start = theta0 != nullptr
                              ? *theta0
                              : Eigen::VectorXd::Zero(problem.dim).eval();
  const double dist0_sq = (start - problem.theta_star).squaredNorm();
  const double log_arg = 2.0 * dist0_sq / eps;
  double k_raw = 0.0;
  if (log_arg > 1.0) k_raw = (8.0 / (lam * out.alpha)) * std::log(log_arg);
  out.K = std::max<long long>(1, static_cast<long long>(std::ceil(k_raw)));

  const double mix =
      (1.0 + (problem.kappa_hat - 1.0) * problem.rho_hat) / (1.0 - problem.rho_hat);
  const double var_term = problem.C_A * problem.C_A * problem.R_theta *
                              problem.R_theta +
                          problem.C_b * problem.C_b;
  const double m_raw =
      (2.0 / lam + 2.0 * out.alpha) * 384.0 * var_term * mix / (lam * eps);
  out.M = std::max<long long>(1, static_cast<long long>(std::ceil(m_raw)));
  return out;
}

}  // namespace mbac
