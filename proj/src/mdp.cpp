#include "ope/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "ope/errors.hpp"

namespace ope {

void TabularMdp::validate() const {
  if (num_states < 1 || num_actions < 1) throw ParameterError("mdp '" + id + "': num_states and num_actions must be positive");
  if (horizon < 1) throw ParameterError("mdp '" + id + "': horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw ParameterError("mdp '" + id + "': discount must lie in (0, 1]");
  if (initial_dist.size() != num_states) throw ShapeError("mdp '" + id + "': initial_dist has wrong length");
  if (!is_probability_vector(initial_dist)) throw ParameterError("mdp '" + id + "': initial_dist is not a probability vector");
  if (static_cast<int>(transition.size()) != num_actions) throw ShapeError("mdp '" + id + "': transition tensor has wrong action count");
  for (int a = 0; a < num_actions; ++a) {
    const Matrix& t = transition[a];
    if (t.rows() != num_states || t.cols() != num_states)
      throw ShapeError("mdp '" + id + "': transition matrix for action " + std::to_string(a) + " has wrong shape");
    if (!rows_are_stochastic(t))
      throw ParameterError("mdp '" + id + "': transition rows for action " + std::to_string(a) + " do not sum to 1");
  }
  if (reward_mean.rows() != num_states || reward_mean.cols() != num_actions)
    throw ShapeError("mdp '" + id + "': reward_mean has wrong shape");
  if (reward_noise_std.rows() != num_states || reward_noise_std.cols() != num_actions)
    throw ShapeError("mdp '" + id + "': reward_noise_std has wrong shape");
  if ((reward_noise_std.array() < 0.0).any())
    throw ParameterError("mdp '" + id + "': reward_noise_std must be nonnegative");
}

TabularMdp TabularMdp::from_json(const Json& j) {
  const std::string ctx = "TabularMdp";
  TabularMdp m;
  m.id = j.value("id", "mdp");
  m.num_states = require_field(j, "num_states", ctx).get<int>();
  m.num_actions = require_field(j, "num_actions", ctx).get<int>();
  m.horizon = require_field(j, "horizon", ctx).get<int>();
  m.discount = require_field(j, "discount", ctx).get<double>();
  m.initial_dist = vector_from_json(require_field(j, "initial_dist", ctx), ctx + ".initial_dist");

  // Stored row-major as [s][a][s'].
  const Json& tj = require_field(j, "transition", ctx);
  if (!tj.is_array() || static_cast<int>(tj.size()) != m.num_states)
    throw ParseError(ctx + ".transition: expected " + std::to_string(m.num_states) + " state rows");
  m.transition.assign(m.num_actions, Matrix::Zero(m.num_states, m.num_states));
  for (int s = 0; s < m.num_states; ++s) {
    const Json& per_action = tj[s];
    if (!per_action.is_array() || static_cast<int>(per_action.size()) != m.num_actions)
      throw ParseError(ctx + ".transition: state " + std::to_string(s) + " must list one row per action");
    for (int a = 0; a < m.num_actions; ++a) {
      const Vector row = vector_from_json(per_action[a], ctx + ".transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
      if (row.size() != m.num_states) throw ParseError(ctx + ".transition: wrong row length at state " + std::to_string(s));
      m.transition[a].row(s) = row.transpose();
    }
  }

  m.reward_mean = matrix_from_json(require_field(j, "reward_mean", ctx), ctx + ".reward_mean");
  const auto noise_it = j.find("reward_noise_std");
  if (noise_it == j.end()) {
    m.reward_noise_std = Matrix::Zero(m.num_states, m.num_actions);
  } else if (noise_it->is_number()) {
    m.reward_noise_std = Matrix::Constant(m.num_states, m.num_actions, noise_it->get<double>());
  } else {
    m.reward_noise_std = matrix_from_json(*noise_it, ctx + ".reward_noise_std");
  }
  m.validate();
  return m;
}

Json TabularMdp::to_json() const {
  Json j;
  j["id"] = id;
  j["num_states"] = num_states;
  j["num_actions"] = num_actions;
  j["horizon"] = horizon;
  j["discount"] = discount;
  j["initial_dist"] = ope::to_json(initial_dist);
  Json tj = Json::array();
  for (int s = 0; s < num_states; ++s) {
    Json per_action = Json::array();
    for (int a = 0; a < num_actions; ++a) per_action.push_back(ope::to_json(Vector(transition[a].row(s).transpose())));
    tj.push_back(std::move(per_action));
  }
  j["transition"] = std::move(tj);
  j["reward_mean"] = ope::to_json(reward_mean);
  j["reward_noise_std"] = ope::to_json(reward_noise_std);
  return j;
}

Vector ContinuousActionMdp::transition_row(int state, double action) const {
  const double a = std::clamp(action, action_bins.front(), action_bins.back());
  const auto upper = std::upper_bound(action_bins.begin(), action_bins.end(), a);
  if (upper == action_bins.begin()) return transition_bins[state].front();
  if (upper == action_bins.end()) return transition_bins[state].back();
  const auto hi = static_cast<std::size_t>(upper - action_bins.begin());
  const auto lo = hi - 1;
  const double span = action_bins[hi] - action_bins[lo];
  const double w = span > 0.0 ? (a - action_bins[lo]) / span : 0.0;
  return (1.0 - w) * transition_bins[state][lo] + w * transition_bins[state][hi];
}

void ContinuousActionMdp::validate() const {
  if (num_states < 1) throw ParameterError("mdp '" + id + "': num_states must be positive");
  if (horizon < 1) throw ParameterError("mdp '" + id + "': horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw ParameterError("mdp '" + id + "': discount must lie in (0, 1]");
  if (initial_dist.size() != num_states || !is_probability_vector(initial_dist))
    throw ParameterError("mdp '" + id + "': bad initial distribution");
  if (action_bins.size() < 2 || !std::is_sorted(action_bins.begin(), action_bins.end()))
    throw ParameterError("mdp '" + id + "': action_bins must be >= 2 ascending values");
  if (static_cast<int>(transition_bins.size()) != num_states)
    throw ShapeError("mdp '" + id + "': transition_bins has wrong state count");
  for (int s = 0; s < num_states; ++s) {
    if (transition_bins[s].size() != action_bins.size())
      throw ShapeError("mdp '" + id + "': state " + std::to_string(s) + " must have one transition row per bin");
    for (const Vector& row : transition_bins[s]) {
      if (row.size() != num_states || !is_probability_vector(row))
        throw ParameterError("mdp '" + id + "': transition bin row is not a probability vector");
    }
  }
  if (reward_base.size() != num_states || reward_slope.size() != num_states || reward_noise_std.size() != num_states)
    throw ShapeError("mdp '" + id + "': reward vectors have wrong length");
  if ((reward_noise_std.array() < 0.0).any())
    throw ParameterError("mdp '" + id + "': reward_noise_std must be nonnegative");
  if (!(action_range.first < action_range.second))
    throw ParameterError("mdp '" + id + "': action_range must be a nonempty interval");
}

ContinuousActionMdp ContinuousActionMdp::from_json(const Json& j) {
  const std::string ctx = "ContinuousActionMdp";
  ContinuousActionMdp m;
  m.id = j.value("id", "mdp");
  m.num_states = require_field(j, "num_states", ctx).get<int>();
  m.horizon = require_field(j, "horizon", ctx).get<int>();
  m.discount = require_field(j, "discount", ctx).get<double>();
  m.initial_dist = vector_from_json(require_field(j, "initial_dist", ctx), ctx + ".initial_dist");
  for (const auto& b : require_field(j, "action_bins", ctx)) m.action_bins.push_back(b.get<double>());
  const Json& tj = require_field(j, "transition_bins", ctx);
  m.transition_bins.resize(tj.size());
  for (std::size_t s = 0; s < tj.size(); ++s)
    for (const auto& row : tj[s])
      m.transition_bins[s].push_back(vector_from_json(row, ctx + ".transition_bins"));
  m.reward_base = vector_from_json(require_field(j, "reward_base", ctx), ctx + ".reward_base");
  m.reward_slope = vector_from_json(require_field(j, "reward_slope", ctx), ctx + ".reward_slope");
  m.reward_noise_std = vector_from_json(require_field(j, "reward_noise_std", ctx), ctx + ".reward_noise_std");
  const Json& range = require_field(j, "action_range", ctx);
  m.action_range = {range.at(0).get<double>(), range.at(1).get<double>()};
  m.validate();
  return m;
}

Json ContinuousActionMdp::to_json() const {
  Json j;
  j["id"] = id;
  j["num_states"] = num_states;
  j["horizon"] = horizon;
  j["discount"] = discount;
  j["initial_dist"] = ope::to_json(initial_dist);
  j["action_bins"] = action_bins;
  Json tj = Json::array();
  for (const auto& rows : transition_bins) {
    Json per_bin = Json::array();
    for (const Vector& row : rows) per_bin.push_back(ope::to_json(row));
    tj.push_back(std::move(per_bin));
  }
  j["transition_bins"] = std::move(tj);
  j["reward_base"] = ope::to_json(reward_base);
  j["reward_slope"] = ope::to_json(reward_slope);
  j["reward_noise_std"] = ope::to_json(reward_noise_std);
  j["action_range"] = Json::array({action_range.first, action_range.second});
  return j;
}

}  // namespace ope
