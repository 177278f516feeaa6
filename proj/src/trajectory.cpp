#include "ope/trajectory.hpp"

#include "ope/errors.hpp"

namespace ope {

namespace {

int sample_row(const Matrix& m, int row, RngStream& rng) {
  const Eigen::RowVectorXd r = m.row(row);
  return rng.categorical(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())));
}

int sample_vector(const Vector& v, RngStream& rng) {
  return rng.categorical(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, RngStream rng) {
  if (!policy.is_discrete())
    throw ShapeError("sample_trajectory: policy '" + policy.id() + "' is continuous but the MDP is discrete");
  if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
    throw ShapeError("sample_trajectory: policy '" + policy.id() + "' does not match MDP '" + mdp.id + "' dimensions");

  Trajectory out;
  out.seed_tag = rng.label();
  out.steps.reserve(mdp.horizon);
  int state = sample_vector(mdp.initial_dist, rng);
  for (int t = 0; t < mdp.horizon; ++t) {
    const int action = sample_action(policy, state, rng);
    double reward = mdp.reward_mean(state, action);
    const double noise = mdp.reward_noise_std(state, action);
    if (noise > 0.0) reward += noise * rng.normal();
    const int next_state = sample_row(mdp.transition[action], state, rng);
    out.steps.push_back({state, static_cast<double>(action), reward, next_state});
    state = next_state;
  }
  return out;
}

Trajectory sample_trajectory(const ContinuousActionMdp& mdp, const Policy& policy, RngStream rng) {
  if (policy.kind() != PolicyKind::gaussian1d)
    throw ShapeError("sample_trajectory: continuous MDP '" + mdp.id + "' requires a gaussian1d policy");
  if (policy.num_states() != mdp.num_states)
    throw ShapeError("sample_trajectory: policy '" + policy.id() + "' does not match MDP '" + mdp.id + "' state count");

  Trajectory out;
  out.seed_tag = rng.label();
  out.steps.reserve(mdp.horizon);
  int state = sample_vector(mdp.initial_dist, rng);
  for (int t = 0; t < mdp.horizon; ++t) {
    const double action = policy.mean(state) + policy.stddev(state) * rng.normal();
    double reward = mdp.mean_reward(state, action);
    if (mdp.reward_noise_std(state) > 0.0) reward += mdp.reward_noise_std(state) * rng.normal();
    const Vector row = mdp.transition_row(state, action);
    const int next_state = sample_vector(row, rng);
    out.steps.push_back({state, action, reward, next_state});
    state = next_state;
  }
  return out;
}

double discounted_return(const Trajectory& trajectory, double discount) {
  double acc = 0.0;
  double scale = 1.0;
  for (const Step& step : trajectory.steps) {
    acc += scale * step.reward;
    scale *= discount;
  }
  return acc;
}

}  // namespace ope
