#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ope/json_util.hpp"
#include "ope/numeric.hpp"

namespace ope {

/// Finite-horizon tabular MDP with explicit transition and reward tables.
///
/// Episodes always run for exactly `horizon` steps; environments with early
/// termination are modeled with self-looping zero-reward states. Rewards are
/// Gaussian with per-(s,a) standard deviation; a zero entry means the reward
/// for that pair is deterministic.
struct TabularMdp {
  std::string id;
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  double discount = 1.0;
  Vector initial_dist;             // [S]
  std::vector<Matrix> transition;  // per action: [S x S], row s is P(s' | s, a)
  Matrix reward_mean;              // [S x A]
  Matrix reward_noise_std;         // [S x A], >= 0

  bool deterministic_rewards() const { return (reward_noise_std.array() == 0.0).all(); }

  /// Checks row-stochasticity (1e-9), the initial distribution, discount in
  /// (0, 1], horizon >= 1. Throws ParameterError/ShapeError.
  void validate() const;

  static TabularMdp from_json(const Json& j);
  Json to_json() const;
};

/// Tabular-state MDP with a scalar continuous action. Transition rows are
/// linearly interpolated between a finite set of action bins (clamped to the
/// outermost bins), and the mean reward is affine in the action per state.
struct ContinuousActionMdp {
  std::string id;
  int num_states = 0;
  int horizon = 0;
  double discount = 1.0;
  Vector initial_dist;                  // [S]
  std::vector<double> action_bins;      // ascending anchor actions
  std::vector<std::vector<Vector>> transition_bins;  // [S][bin] -> row over S
  Vector reward_base;                   // [S]
  Vector reward_slope;                  // [S]; R(s,a) = base[s] + slope[s] * a
  Vector reward_noise_std;              // [S]
  std::pair<double, double> action_range = {0.0, 0.0};

  Vector transition_row(int state, double action) const;
  double mean_reward(int state, double action) const { return reward_base(state) + reward_slope(state) * action; }

  void validate() const;

  static ContinuousActionMdp from_json(const Json& j);
  Json to_json() const;
};

}  // namespace ope
