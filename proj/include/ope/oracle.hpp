#pragma once

#include <vector>

#include "ope/mdp.hpp"
#include "ope/policy.hpp"
#include "ope/rng.hpp"
#include "ope/trajectory.hpp"

namespace ope {

/// Time-indexed Q-function for a finite horizon: values[t] is the [S x A]
/// layer at step t, with Q(T-1,s,a) = R(s,a) and
/// Q(t,s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) sum_a' pi(a'|s') Q(t+1,s',a').
struct QFunction {
  std::vector<Matrix> values;
  double discount = 1.0;
  int horizon() const { return static_cast<int>(values.size()); }
};

/// Per-step state-action visitation d_t(s,a) plus the time average
/// d(s,a) = (1/T) sum_t d_t(s,a).
struct OccupancyMeasure {
  std::vector<Matrix> per_step;
  Matrix averaged;
};

struct MonteCarloValue {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Exact backward induction; no iterative solvers involved.
QFunction exact_q_function(const TabularMdp& mdp, const Policy& policy);

/// V_t(s) = sum_a pi(a|s) Q(t,s,a) for one time layer.
Vector state_values(const QFunction& q, const Policy& policy, int t);

/// J(pi) = sum_s p(s0=s) sum_a pi(a|s) Q(0,s,a).
double exact_policy_value(const TabularMdp& mdp, const Policy& policy);

/// Forward recursion d_0(s,a) = p(s0=s) pi(a|s),
/// d_{t+1}(s',a') = sum_{s,a} d_t(s,a) T(s'|s,a) pi(a'|s').
OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const Policy& policy);

/// Sample mean and standard error of discounted returns over n rollouts.
/// Validation cross-check for exact_policy_value.
MonteCarloValue monte_carlo_policy_value(const TabularMdp& mdp, const Policy& policy, int n, const RngStream& rng);
MonteCarloValue monte_carlo_policy_value(const ContinuousActionMdp& mdp, const Policy& policy, int n, const RngStream& rng);

}  // namespace ope
