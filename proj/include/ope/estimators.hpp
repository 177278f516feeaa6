#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ope/dataset.hpp"
#include "ope/mdp.hpp"
#include "ope/numeric.hpp"
#include "ope/oracle.hpp"
#include "ope/policy.hpp"

namespace ope {

enum class FitMode { empirical, oracle };
enum class TimeMode { averaged, per_step };

/// Placement of the policy argument in the MDR bootstrap term
/// sum_a pi(a|.) Qhat(s_{t+1}, a). `next_state` conditions the mixture on
/// s_{t+1} (the TD-consistent reading, exact on deterministic data with an
/// oracle Q); `current_state` conditions on s_t. Both are exposed because
/// they only coincide for state-independent policies.
enum class MdrBootstrap { next_state, current_state };

std::string to_string(FitMode m);
std::string to_string(TimeMode m);
std::string to_string(MdrBootstrap m);

struct FqeDiagnostics {
  int iterations = 0;
  double bellman_residual = 0.0;
  std::vector<std::pair<int, int>> unvisited;  // (s,a) pairs absent from the data
};

/// Q-function estimate for an evaluation policy: Qhat(t,s,a), [T x (S x A)].
struct FittedQ {
  std::vector<Matrix> q;
  double discount = 1.0;
  FitMode provenance = FitMode::empirical;
  FqeDiagnostics diagnostics;
  int horizon() const { return static_cast<int>(q.size()); }
};

struct WeightDiagnostics {
  // (s,a) pairs with positive evaluation-policy occupancy but zero behavior
  // occupancy; their ratio is set to 0 by convention.
  std::vector<std::pair<int, int>> off_support;
};

/// Marginal state-action importance weights rho(s,a) = d^pi(s,a) / d^pi_b(s,a).
/// `averaged` mode holds one [S x A] table built from time-averaged
/// occupancies; `per_step` holds one table per time step.
struct MarginalWeights {
  std::vector<Matrix> rho;
  TimeMode time_mode = TimeMode::averaged;
  FitMode provenance = FitMode::empirical;
  WeightDiagnostics diagnostics;

  const Matrix& at_time(int t) const { return time_mode == TimeMode::averaged ? rho.front() : rho.at(t); }
};

struct EstimateRow {
  std::string estimator;
  std::string policy_id;
  double estimate = 0.0;
};

/// One point estimate per (estimator, candidate policy) for one dataset.
/// Non-finite values are rejected at insertion time.
struct EstimateTable {
  std::string dataset_id;
  long seed = 0;
  std::vector<EstimateRow> rows;

  void add(const std::string& estimator, const std::string& policy_id, double estimate);
  double at(const std::string& estimator, const std::string& policy_id) const;
  std::vector<std::string> estimators() const;
  std::string to_csv() const;
};

struct EstimatorConfig {
  FitMode q_mode = FitMode::empirical;
  FitMode weight_mode = FitMode::empirical;
  TimeMode time_mode = TimeMode::averaged;
  bool self_normalize = true;
  double bandwidth = 0.3;  // kernel bandwidth for continuous-action PDIS
  MdrBootstrap mdr_bootstrap = MdrBootstrap::next_state;
  // Required for oracle-mode fits; not owned.
  const TabularMdp* mdp = nullptr;
  const Policy* behavior = nullptr;
};

/// Fits the evaluation policy's Q-function. Empirical mode builds
/// maximum-likelihood tables That(s'|s,a), rhat(s,a) from counts and runs
/// exact backward induction on that model; unvisited pairs get rhat = 0 and a
/// self-loop, and are flagged in the diagnostics. Oracle mode delegates to
/// exact_q_function on `oracle_mdp`.
FittedQ fit_fqe(const LoggedDataset& ds, const Policy& policy, FitMode mode,
                const TabularMdp* oracle_mdp = nullptr);

/// Jhat_DM = (1/n) sum_i sum_a pi(a | s_0^i) Qhat(0, s_0^i, a).
double estimate_dm(const LoggedDataset& ds, const Policy& policy, const FittedQ& q);

/// Per-decision importance sampling. Plain form:
///   (1/n) sum_i sum_t gamma^t w_{0:t}^i r_t^i,
/// with w_{0:t} = prod_{t'<=t} pi(a_t'|s_t') / pi_b(a_t'|s_t'). The
/// self-normalized form divides each w_{0:t}^i by sum_i' w_{0:t}^{i'}.
/// Continuous-action datasets use kernel-smoothed per-step weights with the
/// given bandwidth.
double estimate_pdis(const LoggedDataset& ds, const Policy& policy, bool self_normalize,
                     double bandwidth = 0.0);

/// Doubly robust: importance weighting applied to the TD residual only, with
/// w_{0:-1} := 1. The SN form normalizes w_{0:t} and w_{0:t-1} separately per
/// time step.
double estimate_dr(const LoggedDataset& ds, const Policy& policy, const FittedQ& q,
                   bool self_normalize);

/// Marginal weights. Oracle mode: ratio of exact occupancies of `policy` and
/// `behavior` on `oracle_mdp`. Empirical mode: d^pi by forward recursion on
/// the empirical model, d^pi_b by empirical visit frequencies; 0/0 := 0.
MarginalWeights fit_marginal_weights(const LoggedDataset& ds, const Policy& policy, FitMode mode,
                                     TimeMode time_mode, const TabularMdp* oracle_mdp = nullptr,
                                     const Policy* behavior = nullptr);

/// Marginal importance sampling,
///   SN form: sum_i sum_t gamma^t rho(s_t^i, a_t^i) / (sum_i' rho(s_t^i', a_t^i')) r_t^i,
///   plain form: (1/n) sum_i sum_t gamma^t rho(s_t^i, a_t^i) r_t^i.
double estimate_mis(const LoggedDataset& ds, const Policy& policy, const MarginalWeights& w,
                    bool self_normalize = true);

/// Self-normalized marginal doubly robust: DM initial-state term plus the
/// self-normalized weighted TD residual
///   r_t + gamma sum_a pi(a|.) Qhat(t+1, s_{t+1}, a) - Qhat(t, s_t, a_t),
/// with Qhat(T, ., .) := 0 at the final step.
double estimate_mdr(const LoggedDataset& ds, const Policy& policy, const MarginalWeights& w,
                    const FittedQ& q, MdrBootstrap bootstrap = MdrBootstrap::next_state);

/// Kernel-smoothed continuous-action importance weight
///   w = int pi(a|s) / pi_b(a_t|s) (1/h) K((a - a_t)/h) da
/// for a gaussian1d policy and Gaussian kernel, in closed form:
///   N(a_t; mu(s), sigma(s)^2 + h^2) / logged_propensity.
double smoothed_importance_weight(const Policy& policy, int state, double logged_action,
                                  double logged_propensity, double bandwidth);

/// Runs DM, PDIS, DR, MIS and MDR (self-normalized by default) for every
/// candidate, sharing the per-candidate Q and weight fits. Estimator names in
/// the table follow the variant actually computed ("snpdis" vs "pdis", ...).
EstimateTable run_all_estimators(const LoggedDataset& ds, const std::vector<Policy>& candidates,
                                 const EstimatorConfig& config);

}  // namespace ope
