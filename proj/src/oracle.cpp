#include "ope/oracle.hpp"

#include "ope/errors.hpp"

namespace ope {

namespace {

void check_compatible(const TabularMdp& mdp, const Policy& policy) {
  if (!policy.is_discrete())
    throw ShapeError("oracle: policy '" + policy.id() + "' is continuous but MDP '" + mdp.id + "' is discrete");
  if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
    throw ShapeError("oracle: policy '" + policy.id() + "' does not match MDP '" + mdp.id + "' dimensions");
}

}  // namespace

QFunction exact_q_function(const TabularMdp& mdp, const Policy& policy) {
  check_compatible(mdp, policy);
  QFunction q;
  q.discount = mdp.discount;
  q.values.assign(mdp.horizon, Matrix::Zero(mdp.num_states, mdp.num_actions));

  Vector next_v = Vector::Zero(mdp.num_states);  // V_T = 0
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    Matrix& layer = q.values[t];
    layer = mdp.reward_mean;
    for (int a = 0; a < mdp.num_actions; ++a)
      layer.col(a) += mdp.discount * (mdp.transition[a] * next_v);
    next_v = (policy.probs().array() * layer.array()).rowwise().sum().matrix();
  }
  return q;
}

Vector state_values(const QFunction& q, const Policy& policy, int t) {
  return (policy.probs().array() * q.values.at(t).array()).rowwise().sum().matrix();
}

double exact_policy_value(const TabularMdp& mdp, const Policy& policy) {
  const QFunction q = exact_q_function(mdp, policy);
  return mdp.initial_dist.dot(state_values(q, policy, 0));
}

OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const Policy& policy) {
  check_compatible(mdp, policy);
  OccupancyMeasure occ;
  occ.per_step.reserve(mdp.horizon);

  Vector state_marginal = mdp.initial_dist;
  for (int t = 0; t < mdp.horizon; ++t) {
    const Matrix d_t = state_marginal.asDiagonal() * policy.probs();
    occ.per_step.push_back(d_t);
    Vector next_marginal = Vector::Zero(mdp.num_states);
    for (int a = 0; a < mdp.num_actions; ++a)
      next_marginal += mdp.transition[a].transpose() * d_t.col(a);
    state_marginal = next_marginal;
  }

  occ.averaged = Matrix::Zero(mdp.num_states, mdp.num_actions);
  for (const Matrix& d_t : occ.per_step) occ.averaged += d_t;
  occ.averaged /= static_cast<double>(mdp.horizon);
  return occ;
}

namespace {

template <typename MdpType>
MonteCarloValue monte_carlo_impl(const MdpType& mdp, const Policy& policy, int n, const RngStream& rng) {
  if (n < 1) throw ParameterError("monte_carlo_policy_value: n must be >= 1");
  std::vector<double> returns(n);
  for (int i = 0; i < n; ++i) {
    const Trajectory traj = sample_trajectory(mdp, policy, rng.derive(static_cast<std::uint64_t>(i)));
    returns[i] = discounted_return(traj, mdp.discount);
  }
  const MeanStdError stats = mean_and_std_error(returns);
  return {stats.mean, stats.std_error};
}

}  // namespace

MonteCarloValue monte_carlo_policy_value(const TabularMdp& mdp, const Policy& policy, int n, const RngStream& rng) {
  return monte_carlo_impl(mdp, policy, n, rng);
}

MonteCarloValue monte_carlo_policy_value(const ContinuousActionMdp& mdp, const Policy& policy, int n, const RngStream& rng) {
  return monte_carlo_impl(mdp, policy, n, rng);
}

}  // namespace ope
