#pragma once

#include <string>
#include <vector>

#include "ope/mdp.hpp"
#include "ope/policy.hpp"
#include "ope/rng.hpp"

namespace ope {

struct Step {
  int state = 0;
  double action = 0.0;  // integral for discrete action spaces
  double reward = 0.0;
  int next_state = 0;
};

/// One episode of exactly `horizon` steps; next_state of step t equals the
/// state of step t+1. seed_tag identifies the RNG stream that produced it.
struct Trajectory {
  std::vector<Step> steps;
  std::string seed_tag;
};

/// Samples s0 ~ p(s0), then per step a_t ~ pi(.|s_t),
/// r_t = R(s_t,a_t) + noise, s_{t+1} ~ T(.|s_t,a_t). A fixed draw order makes
/// identical (mdp, policy, stream) triples yield bit-identical trajectories.
Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, RngStream rng);

/// Continuous-action variant: requires a gaussian1d policy.
Trajectory sample_trajectory(const ContinuousActionMdp& mdp, const Policy& policy, RngStream rng);

double discounted_return(const Trajectory& trajectory, double discount);

}  // namespace ope
