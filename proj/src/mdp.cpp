#include "mbac/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mbac {

namespace {
constexpr double kProbTol = 1e-12;
}

std::vector<std::string> validate(const FiniteMdp& mdp) {
  std::vector<std::string> report;
  auto fail = [&report](const std::string& msg) { report.push_back(msg); };

  if (mdp.num_states <= 0) fail("num_states must be positive");
  if (mdp.num_actions <= 0) fail("num_actions must be positive");
  if (!(mdp.discount > 0.0 && mdp.discount < 1.0))
    fail("discount must lie strictly inside (0, 1)");
  if (!(mdp.r_max > 0.0)) fail("r_max must be positive");
  if (static_cast<int>(mdp.transition.size()) != mdp.num_actions)
    fail("transition tensor must have one S x S matrix per action");
  if (static_cast<int>(mdp.reward.size()) != mdp.num_actions)
    fail("reward tensor must have one S x S matrix per action");
  if (!report.empty()) return report;  // shape errors make entry checks moot

  const int S = mdp.num_states;
  for (int a = 0; a < mdp.num_actions; ++a) {
    if (mdp.transition[a].rows() != S || mdp.transition[a].cols() != S) {
      std::ostringstream os;
      os << "transition matrix for action " << a << " is not " << S << "x" << S;
      fail(os.str());
      continue;
    }
    for (int s = 0; s < S; ++s) {
      double row_sum = mdp.transition[a].row(s).sum();
      if (std::abs(row_sum - 1.0) > kProbTol) {
        std::ostringstream os;
        os << "transition row (s=" << s << ", a=" << a << ") sums to " << row_sum
           << " (deficit " << 1.0 - row_sum << ")";
        fail(os.str());
      }
      for (int sn = 0; sn < S; ++sn) {
        if (mdp.transition[a](s, sn) < 0.0) {
          std::ostringstream os;
          os << "negative transition probability at (s=" << s << ", a=" << a
             << ", s'=" << sn << ")";
          fail(os.str());
        }
      }
    }
  }
  for (int a = 0; a < mdp.num_actions; ++a) {
    if (mdp.reward[a].rows() != S || mdp.reward[a].cols() != S) {
      std::ostringstream os;
      os << "reward matrix for action " << a << " is not " << S << "x" << S;
      fail(os.str());
      continue;
    }
    for (int s = 0; s < S; ++s)
      for (int sn = 0; sn < S; ++sn) {
        double r = mdp.reward[a](s, sn);
        if (!(std::abs(r) <= mdp.r_max)) {
          std::ostringstream os;
          os << "reward " << r << " at (s=" << s << ", a=" << a << ", s'=" << sn
             << ") exceeds r_max=" << mdp.r_max;
          fail(os.str());
        }
      }
  }
  if (mdp.init_dist.size() != S) {
    fail("init_dist length differs from num_states");
  } else {
    if (std::abs(mdp.init_dist.sum() - 1.0) > kProbTol)
      fail("init_dist does not sum to 1");
    for (int s = 0; s < S; ++s)
      if (mdp.init_dist[s] < 0.0) fail("init_dist has a negative entry");
  }
  return report;
}

TransitionSample step(const FiniteMdp& mdp, PathCursor& cursor, int action,
                      KernelChoice kernel) {
  if (action < 0 || action >= mdp.num_actions)
    throw std::out_of_range("step: action index out of range");

  const int s = cursor.state;
  TransitionSample out;
  out.state = s;
  out.action = action;

  if (kernel == KernelChoice::Visitation &&
      cursor.rng.uniform() < 1.0 - mdp.discount) {
    out.restarted = true;
    out.next_state =
        cursor.rng.categorical(mdp.init_dist.data(), mdp.num_states);
  } else {
    const Eigen::MatrixXd& P = mdp.transition[action];
    // row(s) of a column-major matrix is strided; copy once for the inverse CDF
    Eigen::VectorXd row = P.row(s);
    out.next_state = cursor.rng.categorical(row.data(), mdp.num_states);
  }
  out.reward = mdp.r(s, action, out.next_state);
  cursor.state = out.next_state;
  cursor.samples_drawn += 1;
  return out;
}

std::vector<TransitionSample> sample_trajectory(const FiniteMdp& mdp,
                                                PathCursor& cursor,
                                                const ActionSampler& policy,
                                                int length, KernelChoice kernel) {
  if (length < 1) throw std::invalid_argument("sample_trajectory: length >= 1");
  std::vector<TransitionSample> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    int a = policy(cursor, cursor.state);
    out.push_back(step(mdp, cursor, a, kernel));
  }
  return out;
}

FiniteMdp parse_mdp(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("mdp file: not valid JSON: ") + e.what());
  }

  FiniteMdp mdp;
  try {
    mdp.num_states = doc.at("num_states").get<int>();
    mdp.num_actions = doc.at("num_actions").get<int>();
    mdp.discount = doc.at("discount").get<double>();
    mdp.r_max = doc.value("r_max", 1.0);

    const int S = mdp.num_states, A = mdp.num_actions;
    if (S <= 0 || A <= 0) throw std::runtime_error("mdp file: empty state or action set");

    const auto& trans = doc.at("transition");
    if (!trans.is_array() || static_cast<int>(trans.size()) != S)
      throw std::runtime_error("mdp file: transition has wrong shape");
    mdp.transition.assign(A, Eigen::MatrixXd::Zero(S, S));
    for (int s = 0; s < S; ++s) {
      const auto& per_action = trans.at(s);
      if (!per_action.is_array() || static_cast<int>(per_action.size()) != A)
        throw std::runtime_error("mdp file: transition has wrong shape");
      for (int a = 0; a < A; ++a) {
        const auto& row = per_action.at(a);
        if (!row.is_array() || static_cast<int>(row.size()) != S)
          throw std::runtime_error("mdp file: transition has wrong shape");
        for (int sn = 0; sn < S; ++sn)
          mdp.transition[a](s, sn) = row.at(sn).get<double>();
      }
    }

    mdp.reward.assign(A, Eigen::MatrixXd::Zero(S, S));
    if (doc.contains("reward_fn")) {
      std::string fn = doc.at("reward_fn").get<std::string>();
      const std::string prefix = "indicator_next_state=";
      if (fn.rfind(prefix, 0) != 0)
        throw std::runtime_error("mdp file: unknown reward_fn shorthand: " + fn);
      int target = std::stoi(fn.substr(prefix.size()));
      if (target < 0 || target >= S)
        throw std::runtime_error("mdp file: reward_fn target state out of range");
      for (int a = 0; a < A; ++a) mdp.reward[a].col(target).setOnes();
    } else {
      const auto& rew = doc.at("reward");
      if (!rew.is_array() || static_cast<int>(rew.size()) != S)
        throw std::runtime_error("mdp file: reward has wrong shape");
      for (int s = 0; s < S; ++s) {
        const auto& per_action = rew.at(s);
        if (!per_action.is_array() || static_cast<int>(per_action.size()) != A)
          throw std::runtime_error("mdp file: reward has wrong shape");
        for (int a = 0; a < A; ++a) {
          const auto& row = per_action.at(a);
          if (!row.is_array() || static_cast<int>(row.size()) != S)
            throw std::runtime_error("mdp file: reward has wrong shape");
          for (int sn = 0; sn < S; ++sn)
            mdp.reward[a](s, sn) = row.at(sn).get<double>();
        }
      }
    }

    const auto& xi = doc.at("init_dist");
    if (!xi.is_array() || static_cast<int>(xi.size()) != S)
      throw std::runtime_error("mdp file: init_dist has wrong shape");
    mdp.init_dist.resize(S);
    for (int s = 0; s < S; ++s) mdp.init_dist[s] = xi.at(s).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("mdp file: missing or mistyped field: ") +
                             e.what());
  }

  auto report = validate(mdp);
  if (!report.empty()) {
    std::ostringstream os;
    os << "mdp file rejected by validation:";
    for (const auto& line : report) os << "\n  - " << line;
    throw std::runtime_error(os.str());
  }
  return mdp;
}

FiniteMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("mdp file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mdp(buf.str());
}

}  // namespace mbac
