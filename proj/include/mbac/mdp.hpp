#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mbac/rng.hpp"

namespace mbac {

/**
 * Finite tabular MDP (S, A, P, r, xi, gamma).
 *
 * Transition and reward tensors are stored densely as one S x S matrix per
 * action: transition[a](s, s') is P(s' | s, a) and reward[a](s, s') is
 * r(s, a, s'). init_dist is the restart/initial distribution xi, discount
 * is gamma in (0, 1), and every |r| is bounded by r_max.
 */
struct FiniteMdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> transition;
  std::vector<Eigen::MatrixXd> reward;
  Eigen::VectorXd init_dist;
  double discount = 0.0;
  double r_max = 0.0;

  double p(int s, int a, int s_next) const { return transition[a](s, s_next); }
  double r(int s, int a, int s_next) const { return reward[a](s, s_next); }
};

/**
 * Which Markov kernel a sampler follows. Raw is the MDP kernel P itself;
 * Visitation is the restart mixture gamma * P + (1 - gamma) * xi, whose
 * stationary state-action law is the discounted visitation measure.
 */
enum class KernelChoice { Raw, Visitation };

/** One observed transition. reward always equals r(s, a, s') for the realized s'. */
struct TransitionSample {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
  bool restarted = false;  // Visitation kernel drew s' from xi on this step
};

/**
 * Position on the single continuing sample path: current state plus the
 * private random stream. Phases hand the cursor to each other so the whole
 * run consumes one unbroken trajectory; samples_drawn counts transitions.
 */
struct PathCursor {
  int state = 0;
  DetRng rng;
  std::uint64_t samples_drawn = 0;

  PathCursor(int start_state, std::uint64_t seed) : state(start_state), rng(seed) {}
};

/** Per-state action sampler (typically a policy closure); receives the cursor's rng. */
using ActionSampler = std::function<int(PathCursor&, int state)>;

/**
 * Checks every FiniteMdp invariant and returns one message per violation.
 * An empty report means the MDP is well formed. Never throws.
 */
std::vector<std::string> validate(const FiniteMdp& mdp);

/**
 * Advances the cursor one transition under the chosen kernel and returns the
 * sample. Under Visitation the restart branch is an explicit Bernoulli(1-gamma)
 * draw followed by a draw from xi, so restart events stay observable.
 * Throws std::out_of_range if the action index is invalid.
 */
TransitionSample step(const FiniteMdp& mdp, PathCursor& cursor, int action,
                      KernelChoice kernel);

/** N consecutive on-path samples; the cursor ends at the final next_state. */
std::vector<TransitionSample> sample_trajectory(const FiniteMdp& mdp,
                                                PathCursor& cursor,
                                                const ActionSampler& policy,
                                                int length, KernelChoice kernel);

/**
 * Loads an MDP definition file (JSON: num_states, num_actions, transition,
 * reward or the shorthand reward_fn "indicator_next_state=k", init_dist,
 * discount, r_max). Throws std::runtime_error when the file cannot be parsed
 * or the loaded MDP fails validate().
 */
FiniteMdp load_mdp(const std::string& path);

/** Parses the same JSON document from an in-memory string. */
FiniteMdp parse_mdp(const std::string& text);

}  // namespace mbac
