#pragma once

#include <string>

#include "ope/json_util.hpp"
#include "ope/numeric.hpp"
#include "ope/rng.hpp"

namespace ope {

enum class PolicyKind { tabular, epsilon_greedy, softmax, gaussian1d };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

/// Stochastic decision rule with exact action-probability queries.
///
/// Discrete kinds (tabular, epsilon-greedy, softmax) expose a cached
/// probability matrix; the Gaussian kind exposes per-state mean/std and a
/// density query. All queries are deterministic pure functions; instances are
/// immutable after construction and safe to share across threads.
class Policy {
 public:
  static Policy tabular(std::string id, Matrix probs);
  static Policy gaussian1d(std::string id, Vector mean, Vector stddev);

  const std::string& id() const { return id_; }
  PolicyKind kind() const { return kind_; }
  bool is_discrete() const { return kind_ != PolicyKind::gaussian1d; }

  int num_states() const;
  /// Number of actions for discrete kinds; throws for gaussian1d.
  int num_actions() const;

  /// pi(a | s) for discrete kinds.
  double prob(int state, int action) const;
  const Matrix& probs() const;

  /// Gaussian density pi(a | s) for the continuous kind.
  double density(int state, double action) const;
  double mean(int state) const;
  double stddev(int state) const;

  Policy with_id(std::string new_id) const;

  static Policy from_json(const Json& j);
  Json to_json() const;

  friend Policy make_softmax_policy(const Matrix& q, double temperature, std::string id);
  friend Policy make_epsilon_greedy_policy(const Matrix& q, double epsilon, std::string id);

 private:
  Policy() = default;
  void validate() const;

  std::string id_;
  PolicyKind kind_ = PolicyKind::tabular;
  Matrix probs_;     // discrete kinds
  Matrix q_;         // epsilon_greedy / softmax provenance
  double param_ = 0; // epsilon or temperature
  Vector mean_, std_;  // gaussian1d
};

/// pi(a|s) = exp(q(s,a)/tau) / sum_a' exp(q(s,a')/tau), computed with
/// max-subtraction. tau must be positive.
Policy make_softmax_policy(const Matrix& q, double temperature, std::string id = "softmax");

/// pi(a|s) = (1-eps) * 1{a = argmax_a q(s,a)} + eps / |A|, ties broken toward
/// the lowest action index. eps must lie in [0, 1].
Policy make_epsilon_greedy_policy(const Matrix& q, double epsilon, std::string id = "epsilon-greedy");

/// Discrete kinds: mixes action probabilities toward uniform with weight
/// `noise_level` (0 = unchanged, 1 = uniform), returning a tabular policy.
/// Gaussian kind: adds `noise_level` to the per-state std in quadrature.
/// The rng stream is reserved for perturbation modes that need randomness;
/// both current modes are deterministic.
Policy perturb_policy(const Policy& base, double noise_level, const RngStream& rng);

/// Draws an action index from a discrete policy at `state`.
int sample_action(const Policy& policy, int state, RngStream& rng);

}  // namespace ope
