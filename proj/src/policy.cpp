#include "ope/policy.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "ope/errors.hpp"

namespace ope {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::tabular: return "tabular";
    case PolicyKind::epsilon_greedy: return "epsilon_greedy";
    case PolicyKind::softmax: return "softmax";
    case PolicyKind::gaussian1d: return "gaussian1d";
  }
  throw ParameterError("unknown policy kind");
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "tabular") return PolicyKind::tabular;
  if (s == "epsilon_greedy") return PolicyKind::epsilon_greedy;
  if (s == "softmax") return PolicyKind::softmax;
  if (s == "gaussian1d") return PolicyKind::gaussian1d;
  throw ParseError("unknown policy kind '" + s + "'");
}

void Policy::validate() const {
  if (kind_ == PolicyKind::gaussian1d) {
    if (mean_.size() == 0 || mean_.size() != std_.size())
      throw ShapeError("policy '" + id_ + "': mean/std length mismatch");
    if (!(std_.array() > 0.0).all())
      throw ParameterError("policy '" + id_ + "': gaussian std must be positive in every state");
    return;
  }
  if (probs_.rows() == 0 || probs_.cols() == 0)
    throw ShapeError("policy '" + id_ + "': empty probability matrix");
  if (!rows_are_stochastic(probs_))
    throw ParameterError("policy '" + id_ + "': action probabilities must sum to 1 per state");
}

Policy Policy::tabular(std::string id, Matrix probs) {
  Policy p;
  p.id_ = std::move(id);
  p.kind_ = PolicyKind::tabular;
  p.probs_ = std::move(probs);
  p.validate();
  return p;
}

Policy Policy::gaussian1d(std::string id, Vector mean, Vector stddev) {
  Policy p;
  p.id_ = std::move(id);
  p.kind_ = PolicyKind::gaussian1d;
  p.mean_ = std::move(mean);
  p.std_ = std::move(stddev);
  p.validate();
  return p;
}

int Policy::num_states() const {
  return kind_ == PolicyKind::gaussian1d ? static_cast<int>(mean_.size()) : static_cast<int>(probs_.rows());
}

int Policy::num_actions() const {
  if (kind_ == PolicyKind::gaussian1d)
    throw ShapeError("policy '" + id_ + "': continuous policies have no action count");
  return static_cast<int>(probs_.cols());
}

double Policy::prob(int state, int action) const {
  if (kind_ == PolicyKind::gaussian1d)
    throw ShapeError("policy '" + id_ + "': prob() is only defined for discrete kinds");
  return probs_(state, action);
}

const Matrix& Policy::probs() const {
  if (kind_ == PolicyKind::gaussian1d)
    throw ShapeError("policy '" + id_ + "': probs() is only defined for discrete kinds");
  return probs_;
}

double Policy::density(int state, double action) const {
  if (kind_ != PolicyKind::gaussian1d)
    throw ShapeError("policy '" + id_ + "': density() is only defined for gaussian1d");
  const double sigma = std_(state);
  const double z = (action - mean_(state)) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double Policy::mean(int state) const {
  if (kind_ != PolicyKind::gaussian1d) throw ShapeError("policy '" + id_ + "': mean() requires gaussian1d");
  return mean_(state);
}

double Policy::stddev(int state) const {
  if (kind_ != PolicyKind::gaussian1d) throw ShapeError("policy '" + id_ + "': stddev() requires gaussian1d");
  return std_(state);
}

Policy Policy::with_id(std::string new_id) const {
  Policy p = *this;
  p.id_ = std::move(new_id);
  return p;
}

Policy make_softmax_policy(const Matrix& q, double temperature, std::string id) {
  if (!(temperature > 0.0)) throw ParameterError("make_softmax_policy: temperature must be positive");
  if (!q.allFinite()) throw ParameterError("make_softmax_policy: q-table must be finite");
  Policy p;
  p.id_ = std::move(id);
  p.kind_ = PolicyKind::softmax;
  p.q_ = q;
  p.param_ = temperature;
  p.probs_ = Matrix(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const Eigen::ArrayXd logits = q.row(s).array() / temperature;
    const Eigen::ArrayXd shifted = (logits - logits.maxCoeff()).exp();
    p.probs_.row(s) = (shifted / shifted.sum()).matrix();
  }
  p.validate();
  return p;
}

Policy make_epsilon_greedy_policy(const Matrix& q, double epsilon, std::string id) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("make_epsilon_greedy_policy: epsilon must lie in [0, 1]");
  Policy p;
  p.id_ = std::move(id);
  p.kind_ = PolicyKind::epsilon_greedy;
  p.q_ = q;
  p.param_ = epsilon;
  const auto num_actions = q.cols();
  p.probs_ = Matrix::Constant(q.rows(), num_actions, epsilon / static_cast<double>(num_actions));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;  // strict comparison keeps the lowest index on ties
    for (Eigen::Index a = 1; a < num_actions; ++a)
      if (q(s, a) > q(s, best)) best = a;
    p.probs_(s, best) += 1.0 - epsilon;
  }
  p.validate();
  return p;
}

Policy perturb_policy(const Policy& base, double noise_level, const RngStream& rng) {
  (void)rng;
  if (noise_level < 0.0) throw ParameterError("perturb_policy: noise_level must be nonnegative");
  if (base.kind() == PolicyKind::gaussian1d) {
    Vector stds(base.num_states());
    Vector means(base.num_states());
    for (int s = 0; s < base.num_states(); ++s) {
      means(s) = base.mean(s);
      stds(s) = std::sqrt(base.stddev(s) * base.stddev(s) + noise_level * noise_level);
    }
    return Policy::gaussian1d(base.id(), std::move(means), std::move(stds));
  }
  const Matrix& probs = base.probs();
  const double uniform = 1.0 / static_cast<double>(probs.cols());
  Matrix mixed = (1.0 - noise_level) * probs;
  mixed.array() += noise_level * uniform;
  return Policy::tabular(base.id(), std::move(mixed));
}

int sample_action(const Policy& policy, int state, RngStream& rng) {
  const Matrix& probs = policy.probs();
  const Eigen::RowVectorXd row = probs.row(state);
  return rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
}

Policy Policy::from_json(const Json& j) {
  const std::string ctx = "Policy";
  const std::string id = j.value("id", "policy");
  const PolicyKind kind = policy_kind_from_string(require_field(j, "kind", ctx).get<std::string>());
  switch (kind) {
    case PolicyKind::tabular:
      return tabular(id, matrix_from_json(require_field(j, "probs", ctx), ctx + ".probs"));
    case PolicyKind::epsilon_greedy:
      return make_epsilon_greedy_policy(matrix_from_json(require_field(j, "q", ctx), ctx + ".q"),
                                        require_field(j, "epsilon", ctx).get<double>(), id);
    case PolicyKind::softmax:
      return make_softmax_policy(matrix_from_json(require_field(j, "q", ctx), ctx + ".q"),
                                 require_field(j, "temperature", ctx).get<double>(), id);
    case PolicyKind::gaussian1d:
      return gaussian1d(id, vector_from_json(require_field(j, "mean", ctx), ctx + ".mean"),
                        vector_from_json(require_field(j, "std", ctx), ctx + ".std"));
  }
  throw ParseError("Policy: unknown kind");
}

Json Policy::to_json() const {
  Json j;
  j["id"] = id_;
  j["kind"] = to_string(kind_);
  switch (kind_) {
    case PolicyKind::tabular:
      j["probs"] = ope::to_json(probs_);
      break;
    case PolicyKind::epsilon_greedy:
      j["q"] = ope::to_json(q_);
      j["epsilon"] = param_;
      break;
    case PolicyKind::softmax:
      j["q"] = ope::to_json(q_);
      j["temperature"] = param_;
      break;
    case PolicyKind::gaussian1d:
      j["mean"] = ope::to_json(mean_);
      j["std"] = ope::to_json(std_);
      break;
  }
  return j;
}

}  // namespace ope
