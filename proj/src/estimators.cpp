#include "ope/estimators.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "ope/errors.hpp"

namespace ope {

std::string to_string(FitMode m) { return m == FitMode::empirical ? "empirical" : "oracle"; }
std::string to_string(TimeMode m) { return m == TimeMode::averaged ? "averaged" : "per_step"; }
std::string to_string(MdrBootstrap m) { return m == MdrBootstrap::next_state ? "next_state" : "current_state"; }

namespace {

void check_discrete(const LoggedDataset& ds, const Policy& policy, const std::string& where) {
  if (ds.action_space != ActionSpace::discrete)
    throw ParameterError(where + ": requires a discrete-action dataset");
  if (!policy.is_discrete())
    throw ShapeError(where + ": policy '" + policy.id() + "' is continuous but the dataset is discrete");
  if (policy.num_states() != ds.num_states || policy.num_actions() != ds.num_actions)
    throw ShapeError(where + ": policy '" + policy.id() + "' does not match the dataset dimensions");
}

/// Cumulative per-decision weights w_{0:t} for every trajectory, as an
/// n-by-T column-major table (one contiguous column per time step).
Matrix cumulative_weights(const LoggedDataset& ds, const Policy& policy, double bandwidth) {
  const int n = ds.n();
  const int horizon = ds.horizon;
  Matrix w(n, horizon);
  for (int i = 0; i < n; ++i) {
    const LoggedTrajectory& item = ds.trajectories[i];
    double acc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const Step& step = item.trajectory.steps[t];
      double ratio;
      if (ds.action_space == ActionSpace::discrete) {
        ratio = policy.prob(step.state, static_cast<int>(step.action)) / item.behavior_probs[t];
      } else {
        ratio = smoothed_importance_weight(policy, step.state, step.action, item.behavior_probs[t], bandwidth);
      }
      acc *= ratio;
      w(i, t) = acc;
    }
  }
  return w;
}

double column_sum(const Matrix& m, int col) {
  return pairwise_sum(std::span<const double>(m.col(col).data(), static_cast<std::size_t>(m.rows())));
}

/// Per-time-step normalizers sum_i w_{0:t}^i; throws if some step has no mass.
Vector normalizers(const Matrix& w, const std::string& estimator) {
  Vector z(w.cols());
  for (int t = 0; t < w.cols(); ++t) {
    z(t) = column_sum(w, t);
    if (!(z(t) > 0.0))
      throw DegenerateNormalizationError(
          estimator + ": all importance weights are zero at time step " + std::to_string(t) +
              "; the behavior support does not cover the evaluation policy",
          t);
  }
  return z;
}

std::vector<Vector> policy_state_values(const FittedQ& q, const Policy& policy) {
  std::vector<Vector> v;
  v.reserve(q.q.size());
  for (const Matrix& layer : q.q)
    v.push_back((policy.probs().array() * layer.array()).rowwise().sum().matrix());
  return v;
}

/// Ratio with the 0/0 := 0 convention; pairs reachable by the numerator but
/// not the denominator are reported.
Matrix occupancy_ratio(const Matrix& num, const Matrix& den, WeightDiagnostics& diag) {
  Matrix rho = Matrix::Zero(num.rows(), num.cols());
  for (Eigen::Index s = 0; s < num.rows(); ++s) {
    for (Eigen::Index a = 0; a < num.cols(); ++a) {
      if (den(s, a) > 0.0) {
        rho(s, a) = num(s, a) / den(s, a);
      } else if (num(s, a) > 0.0) {
        diag.off_support.emplace_back(static_cast<int>(s), static_cast<int>(a));
      }
    }
  }
  return rho;
}

/// Maximum-likelihood tabular model of the logged data. Unvisited (s,a)
/// pairs self-loop with zero reward and are listed in `unvisited`.
struct EmpiricalModel {
  TabularMdp mdp;
  std::vector<std::pair<int, int>> unvisited;
};

EmpiricalModel empirical_model(const LoggedDataset& ds) {
  const int S = ds.num_states;
  const int A = ds.num_actions;
  EmpiricalModel out;
  TabularMdp& m = out.mdp;
  m.id = ds.mdp_id + "-empirical";
  m.num_states = S;
  m.num_actions = A;
  m.horizon = ds.horizon;
  m.discount = ds.discount;
  m.reward_noise_std = Matrix::Zero(S, A);

  Matrix visits = Matrix::Zero(S, A);
  Matrix reward_sum = Matrix::Zero(S, A);
  std::vector<Matrix> transition_counts(A, Matrix::Zero(S, S));
  Vector initial_counts = Vector::Zero(S);
  for (const LoggedTrajectory& item : ds.trajectories) {
    initial_counts(item.trajectory.steps.front().state) += 1.0;
    for (const Step& step : item.trajectory.steps) {
      const int a = static_cast<int>(step.action);
      visits(step.state, a) += 1.0;
      reward_sum(step.state, a) += step.reward;
      transition_counts[a](step.state, step.next_state) += 1.0;
    }
  }

  m.initial_dist = initial_counts / initial_counts.sum();
  m.reward_mean = Matrix::Zero(S, A);
  m.transition.assign(A, Matrix::Zero(S, S));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (visits(s, a) > 0.0) {
        m.reward_mean(s, a) = reward_sum(s, a) / visits(s, a);
        m.transition[a].row(s) = transition_counts[a].row(s) / visits(s, a);
      } else {
        m.transition[a](s, s) = 1.0;
        out.unvisited.emplace_back(s, a);
      }
    }
  }
  m.validate();
  return out;
}

}  // namespace

void EstimateTable::add(const std::string& estimator, const std::string& policy_id, double estimate) {
  if (!std::isfinite(estimate))
    throw EstimatorError("estimator '" + estimator + "' produced a non-finite estimate for policy '" + policy_id + "'",
                         estimator, policy_id);
  rows.push_back({estimator, policy_id, estimate});
}

double EstimateTable::at(const std::string& estimator, const std::string& policy_id) const {
  for (const EstimateRow& row : rows)
    if (row.estimator == estimator && row.policy_id == policy_id) return row.estimate;
  throw ParameterError("EstimateTable: no entry for (" + estimator + ", " + policy_id + ")");
}

std::vector<std::string> EstimateTable::estimators() const {
  std::vector<std::string> out;
  for (const EstimateRow& row : rows)
    if (std::find(out.begin(), out.end(), row.estimator) == out.end()) out.push_back(row.estimator);
  return out;
}

std::string EstimateTable::to_csv() const {
  std::string out = "estimator,policy_id,estimate,seed,dataset_id\n";
  char buf[64];
  for (const EstimateRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.estimate);
    out += row.estimator + "," + row.policy_id + "," + buf + "," + std::to_string(seed) + "," + dataset_id + "\n";
  }
  return out;
}

FittedQ fit_fqe(const LoggedDataset& ds, const Policy& policy, FitMode mode, const TabularMdp* oracle_mdp) {
  if (ds.trajectories.empty()) throw ParameterError("fit_fqe: dataset is empty");
  check_discrete(ds, policy, "fit_fqe");

  FittedQ out;
  out.discount = ds.discount;
  out.provenance = mode;
  if (mode == FitMode::oracle) {
    if (oracle_mdp == nullptr) throw ParameterError("fit_fqe: oracle mode requires the true MDP");
    out.q = exact_q_function(*oracle_mdp, policy).values;
    out.diagnostics.iterations = ds.horizon;
    return out;
  }

  EmpiricalModel model = empirical_model(ds);
  out.q = exact_q_function(model.mdp, policy).values;
  out.diagnostics.iterations = ds.horizon;
  out.diagnostics.unvisited = std::move(model.unvisited);

  // Residual of the fitted Q against the empirical-model Bellman operator.
  double residual = 0.0;
  Vector next_v = Vector::Zero(ds.num_states);
  for (int t = ds.horizon - 1; t >= 0; --t) {
    Matrix expected = model.mdp.reward_mean;
    for (int a = 0; a < ds.num_actions; ++a)
      expected.col(a) += ds.discount * (model.mdp.transition[a] * next_v);
    residual = std::max(residual, (expected - out.q[t]).cwiseAbs().maxCoeff());
    next_v = (policy.probs().array() * out.q[t].array()).rowwise().sum().matrix();
  }
  out.diagnostics.bellman_residual = residual;
  return out;
}

double estimate_dm(const LoggedDataset& ds, const Policy& policy, const FittedQ& q) {
  check_discrete(ds, policy, "estimate_dm");
  const Matrix& q0 = q.q.front();
  const Vector v0 = (policy.probs().array() * q0.array()).rowwise().sum().matrix();
  std::vector<double> terms(ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
    terms[i] = v0(ds.trajectories[i].trajectory.steps.front().state);
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double estimate_pdis(const LoggedDataset& ds, const Policy& policy, bool self_normalize, double bandwidth) {
  if (ds.action_space == ActionSpace::continuous) {
    if (policy.kind() != PolicyKind::gaussian1d)
      throw ShapeError("estimate_pdis: continuous datasets require a gaussian1d policy");
    if (!(bandwidth > 0.0)) throw ParameterError("estimate_pdis: continuous datasets require a positive bandwidth");
  } else {
    check_discrete(ds, policy, "estimate_pdis");
  }

  const Matrix w = cumulative_weights(ds, policy, bandwidth);
  const int n = ds.n();
  const int horizon = ds.horizon;

  if (!self_normalize) {
    std::vector<double> contributions(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      double scale = 1.0;
      for (int t = 0; t < horizon; ++t) {
        acc += scale * (w(i, t) * ds.trajectories[i].trajectory.steps[t].reward);
        scale *= ds.discount;
      }
      contributions[i] = acc;
    }
    return pairwise_sum(contributions) / static_cast<double>(n);
  }

  const Vector z = normalizers(w, "snpdis");
  double total = 0.0;
  double scale = 1.0;
  std::vector<double> terms(n);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i)
      terms[i] = (w(i, t) / z(t)) * ds.trajectories[i].trajectory.steps[t].reward;
    total += scale * pairwise_sum(terms);
    scale *= ds.discount;
  }
  return total;
}

double estimate_dr(const LoggedDataset& ds, const Policy& policy, const FittedQ& q, bool self_normalize) {
  check_discrete(ds, policy, "estimate_dr");
  if (q.horizon() != ds.horizon) throw ShapeError("estimate_dr: FittedQ horizon does not match the dataset");

  const Matrix w = cumulative_weights(ds, policy, 0.0);
  const std::vector<Vector> v = policy_state_values(q, policy);
  const int n = ds.n();
  const int horizon = ds.horizon;

  // w_{0:t-1}, with the empty product at t = 0.
  auto w_prev = [&](int i, int t) { return t == 0 ? 1.0 : w(i, t - 1); };

  if (!self_normalize) {
    std::vector<double> contributions(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      double scale = 1.0;
      for (int t = 0; t < horizon; ++t) {
        const Step& step = ds.trajectories[i].trajectory.steps[t];
        acc += scale * (w(i, t) * (step.reward - q.q[t](step.state, static_cast<int>(step.action))));
        acc += scale * (w_prev(i, t) * v[t](step.state));
        scale *= ds.discount;
      }
      contributions[i] = acc;
    }
    return pairwise_sum(contributions) / static_cast<double>(n);
  }

  const Vector z = normalizers(w, "sndr");
  // Normalizer for w_{0:t-1}: at t = 0 every trajectory has weight 1.
  auto z_prev = [&](int t) { return t == 0 ? static_cast<double>(n) : z(t - 1); };

  double total = 0.0;
  double scale = 1.0;
  std::vector<double> residual_terms(n);
  std::vector<double> baseline_terms(n);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      const Step& step = ds.trajectories[i].trajectory.steps[t];
      residual_terms[i] = (w(i, t) / z(t)) * (step.reward - q.q[t](step.state, static_cast<int>(step.action)));
      baseline_terms[i] = (w_prev(i, t) / z_prev(t)) * v[t](step.state);
    }
    total += scale * pairwise_sum(residual_terms);
    total += scale * pairwise_sum(baseline_terms);
    scale *= ds.discount;
  }
  return total;
}

MarginalWeights fit_marginal_weights(const LoggedDataset& ds, const Policy& policy, FitMode mode,
                                     TimeMode time_mode, const TabularMdp* oracle_mdp, const Policy* behavior) {
  check_discrete(ds, policy, "fit_marginal_weights");

  MarginalWeights out;
  out.provenance = mode;
  out.time_mode = time_mode;

  OccupancyMeasure occ_pi;
  std::vector<Matrix> behavior_per_step;
  Matrix behavior_averaged;

  if (mode == FitMode::oracle) {
    if (oracle_mdp == nullptr || behavior == nullptr)
      throw ParameterError("fit_marginal_weights: oracle mode requires the true MDP and the behavior policy");
    occ_pi = exact_occupancy(*oracle_mdp, policy);
    const OccupancyMeasure occ_b = exact_occupancy(*oracle_mdp, *behavior);
    behavior_per_step = occ_b.per_step;
    behavior_averaged = occ_b.averaged;
  } else {
    const EmpiricalModel model = empirical_model(ds);
    occ_pi = exact_occupancy(model.mdp, policy);
    behavior_per_step.assign(ds.horizon, Matrix::Zero(ds.num_states, ds.num_actions));
    for (const LoggedTrajectory& item : ds.trajectories)
      for (int t = 0; t < ds.horizon; ++t) {
        const Step& step = item.trajectory.steps[t];
        behavior_per_step[t](step.state, static_cast<int>(step.action)) += 1.0;
      }
    behavior_averaged = Matrix::Zero(ds.num_states, ds.num_actions);
    for (Matrix& layer : behavior_per_step) {
      layer /= static_cast<double>(ds.n());
      behavior_averaged += layer;
    }
    behavior_averaged /= static_cast<double>(ds.horizon);
  }

  if (time_mode == TimeMode::averaged) {
    out.rho.push_back(occupancy_ratio(occ_pi.averaged, behavior_averaged, out.diagnostics));
  } else {
    for (int t = 0; t < ds.horizon; ++t)
      out.rho.push_back(occupancy_ratio(occ_pi.per_step[t], behavior_per_step[t], out.diagnostics));
  }
  return out;
}

double estimate_mis(const LoggedDataset& ds, const Policy& policy, const MarginalWeights& w, bool self_normalize) {
  check_discrete(ds, policy, "estimate_mis");
  const int n = ds.n();
  const int horizon = ds.horizon;

  Matrix rho(n, horizon);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < horizon; ++t) {
      const Step& step = ds.trajectories[i].trajectory.steps[t];
      rho(i, t) = w.at_time(t)(step.state, static_cast<int>(step.action));
    }

  if (!self_normalize) {
    std::vector<double> contributions(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      double scale = 1.0;
      for (int t = 0; t < horizon; ++t) {
        acc += scale * (rho(i, t) * ds.trajectories[i].trajectory.steps[t].reward);
        scale *= ds.discount;
      }
      contributions[i] = acc;
    }
    return pairwise_sum(contributions) / static_cast<double>(n);
  }

  const Vector z = normalizers(rho, "snmis");
  double total = 0.0;
  double scale = 1.0;
  std::vector<double> terms(n);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i)
      terms[i] = (rho(i, t) / z(t)) * ds.trajectories[i].trajectory.steps[t].reward;
    total += scale * pairwise_sum(terms);
    scale *= ds.discount;
  }
  return total;
}

double estimate_mdr(const LoggedDataset& ds, const Policy& policy, const MarginalWeights& w,
                    const FittedQ& q, MdrBootstrap bootstrap) {
  check_discrete(ds, policy, "estimate_mdr");
  if (q.horizon() != ds.horizon) throw ShapeError("estimate_mdr: FittedQ horizon does not match the dataset");

  const int n = ds.n();
  const int horizon = ds.horizon;
  const Matrix& probs = policy.probs();

  Matrix rho(n, horizon);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < horizon; ++t) {
      const Step& step = ds.trajectories[i].trajectory.steps[t];
      rho(i, t) = w.at_time(t)(step.state, static_cast<int>(step.action));
    }
  const Vector z = normalizers(rho, "snmdr");

  // DM initial-state term.
  const Vector v0 = (probs.array() * q.q.front().array()).rowwise().sum().matrix();
  std::vector<double> dm_terms(n);
  for (int i = 0; i < n; ++i) dm_terms[i] = v0(ds.trajectories[i].trajectory.steps.front().state);
  double total = pairwise_sum(dm_terms) / static_cast<double>(n);

  // Self-normalized TD-residual correction. The bootstrap mixes the Q layer
  // at t+1 evaluated at s_{t+1} with policy probabilities at either s_t
  // (current_state mode) or s_{t+1}; Qhat(T, ., .) := 0.
  double scale = 1.0;
  std::vector<double> terms(n);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      const Step& step = ds.trajectories[i].trajectory.steps[t];
      double bootstrap_value = 0.0;
      if (t + 1 < horizon) {
        const int prob_state = bootstrap == MdrBootstrap::current_state ? step.state : step.next_state;
        bootstrap_value = probs.row(prob_state).dot(q.q[t + 1].row(step.next_state));
      }
      const double residual = step.reward + ds.discount * bootstrap_value -
                              q.q[t](step.state, static_cast<int>(step.action));
      terms[i] = (rho(i, t) / z(t)) * residual;
    }
    total += scale * pairwise_sum(terms);
    scale *= ds.discount;
  }
  return total;
}

double smoothed_importance_weight(const Policy& policy, int state, double logged_action,
                                  double logged_propensity, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ParameterError("smoothed_importance_weight: bandwidth must be positive");
  if (!(logged_propensity > 0.0)) throw ParameterError("smoothed_importance_weight: propensity must be positive");
  if (policy.kind() != PolicyKind::gaussian1d)
    throw ShapeError("smoothed_importance_weight: requires a gaussian1d policy");
  // Convolving N(mu, sigma^2) with the Gaussian kernel gives
  // N(a_t; mu, sigma^2 + h^2).
  const double sigma = policy.stddev(state);
  const double var = sigma * sigma + bandwidth * bandwidth;
  const double diff = logged_action - policy.mean(state);
  const double density = std::exp(-0.5 * diff * diff / var) / std::sqrt(2.0 * std::numbers::pi * var);
  return density / logged_propensity;
}

EstimateTable run_all_estimators(const LoggedDataset& ds, const std::vector<Policy>& candidates,
                                 const EstimatorConfig& config) {
  if (candidates.empty()) throw ParameterError("run_all_estimators: candidate list is empty");
  if (ds.action_space != ActionSpace::discrete)
    throw ParameterError("run_all_estimators: continuous datasets are supported by estimate_pdis only");
  if (config.q_mode == FitMode::oracle && config.mdp == nullptr)
    throw ParameterError("run_all_estimators: oracle q_mode requires config.mdp");
  if (config.weight_mode == FitMode::oracle && (config.mdp == nullptr || config.behavior == nullptr))
    throw ParameterError("run_all_estimators: oracle weight_mode requires config.mdp and config.behavior");

  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = i + 1; j < candidates.size(); ++j)
      if (candidates[i].id() == candidates[j].id())
        throw ParameterError("run_all_estimators: duplicate candidate id '" + candidates[i].id() + "'");

  const bool sn = config.self_normalize;
  EstimateTable table;
  table.dataset_id = ds.dataset_id();
  table.seed = ds.seed;
  for (const Policy& policy : candidates) {
    const FittedQ q = fit_fqe(ds, policy, config.q_mode, config.mdp);
    const MarginalWeights weights =
        fit_marginal_weights(ds, policy, config.weight_mode, config.time_mode, config.mdp, config.behavior);
    table.add("dm", policy.id(), estimate_dm(ds, policy, q));
    table.add(sn ? "snpdis" : "pdis", policy.id(), estimate_pdis(ds, policy, sn));
    table.add(sn ? "sndr" : "dr", policy.id(), estimate_dr(ds, policy, q, sn));
    table.add(sn ? "snmis" : "mis", policy.id(), estimate_mis(ds, policy, weights, sn));
    // MDR is only defined in self-normalized form.
    table.add("snmdr", policy.id(), estimate_mdr(ds, policy, weights, q, config.mdr_bootstrap));
  }
  return table;
}

}  // namespace ope
