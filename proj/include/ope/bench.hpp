#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ope/estimators.hpp"
#include "ope/json_util.hpp"
#include "ope/mdp.hpp"
#include "ope/metrics.hpp"
#include "ope/policy.hpp"

namespace ope {

struct MetricConfig {
  std::vector<int> k_list;  // empty -> 1..k_max
  int k_max = 0;            // 0 -> number of candidates
  int reference_k = 5;      // k used by the cross-metric comparison
  bool force_baseline_in_portfolio = false;
};

/// Candidate-policy suite: either explicit policies or a base-q-table x
/// noise-level grid, subsampled without replacement, with the behavior
/// policy appended.
struct CandidateSuiteConfig {
  std::vector<Policy> explicit_policies;

  struct Base {
    std::string id;
    Matrix q;
  };
  std::vector<Base> bases;
  bool reference_bases = false;  // derive bases from exact Q of built-in reference policies
  std::vector<double> noise_levels;
  std::string style = "epsilon_greedy";  // or "perturb_softmax"
  double softmax_temperature = 1.0;      // base policy temperature for perturb_softmax
  int subsample = 0;                     // 0 -> keep the whole grid
  std::uint64_t suite_seed = 0;
};

struct ExperimentConfig {
  TabularMdp mdp;
  Policy behavior = Policy::tabular("pi_b", Matrix::Constant(1, 1, 1.0));
  CandidateSuiteConfig suite;
  int n_trajectories = 1;
  std::vector<long> seeds;
  EstimatorConfig estimator;  // mdp/behavior pointers are filled by run_experiment
  MetricConfig metrics;
  int parallelism = 1;

  void validate() const;
  /// Parses a config document; `base_dir` resolves "file" references.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = ".");
  Json to_json() const;
  /// SHA-256 of the canonical (sorted-key) JSON form.
  std::string config_hash() const;
};

/// Tagged metric value; skipped entries record why (degenerate instance,
/// undefined correlation, ...) instead of being dropped silently.
struct MetricValue {
  enum class Status { ok, pos_inf, neg_inf, skipped };
  Status status = Status::ok;
  double value = 0.0;
  std::string note;

  static MetricValue ok(double v) { return {Status::ok, v, ""}; }
  static MetricValue skipped(std::string why) { return {Status::skipped, 0.0, std::move(why)}; }
};

struct SeedMetrics {
  MetricValue nmse;
  MetricValue rankcorr;
  std::map<int, MetricValue> nregret;
  std::map<int, SharpeResult> sharpe;
  PortfolioStats portfolio;
};

struct SeedResult {
  long seed = 0;
  bool failed = false;
  std::string failure;
  EstimateTable estimates;
  std::map<std::string, SeedMetrics> metrics;  // keyed by estimator
};

struct AggregateValue {
  double mean = 0.0;
  double std = 0.0;
  int n_used = 0;
  int n_pos_inf = 0;
  int n_neg_inf = 0;
  int n_skipped = 0;
};

struct CrossMetricEntry {
  double spearman_mean = 0.0;
  double spearman_std = 0.0;
  int disagreements = 0;  // seeds whose best estimator differs from the reference's
  int excluded = 0;       // seeds excluded for undefined correlation or failure
  int n_seeds = 0;
};

struct AggregateReport {
  std::string config_hash;
  std::string version;
  std::string mdp_id;
  std::string baseline_id;
  double baseline_value = 0.0;
  ValueMap truths;
  std::vector<long> seeds;
  std::vector<SeedResult> per_seed;
  bool partial = false;  // some seed recorded a failure
  MetricConfig metric_config;
  std::vector<std::string> estimator_names;
  // aggregate[estimator][metric][k]; k = 0 for k-less metrics.
  std::map<std::string, std::map<std::string, std::map<int, AggregateValue>>> aggregate;
  std::string reference_metric = "sharpe_ratio";
  int reference_k = 0;
  std::map<std::string, CrossMetricEntry> cross_metric;

  Json to_json() const;
  std::string to_csv() const;
};

/// Test-only injection point: replaces run_all_estimators for a seed.
using EstimateInjector =
    std::function<EstimateTable(const LoggedDataset& ds, const std::vector<Policy>& candidates, long seed)>;

/// Builds the base x noise-level grid, subsamples it without replacement
/// (deterministic in suite_seed) and appends the behavior policy.
std::vector<Policy> build_candidate_suite(const ExperimentConfig& config);

/// Per seed: generate dataset -> estimate -> score against oracle truths;
/// then aggregate across seeds. Deterministic per config and independent of
/// `parallelism`. Seed failures are recorded, never silently dropped.
AggregateReport run_experiment(const ExperimentConfig& config, const EstimateInjector* injector = nullptr);

/// Per seed, ranks estimators under <reference_metric>@reference_k and under
/// each conventional metric (higher RankCorr better, lower nMSE/nRegret@1
/// better); reports Spearman rho mean/std and best-estimator disagreement
/// counts. Stores the result in `report.cross_metric` and returns it.
std::map<std::string, CrossMetricEntry> cross_metric_comparison(AggregateReport& report,
                                                                const std::string& reference_metric,
                                                                int reference_k);

enum class ReportFormat { json, csv };

/// Writes the report; JSON round-trips losslessly, CSV is tidy (one
/// observation per row). Infinity sentinels appear as "+inf"/"-inf".
void emit_report(const AggregateReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace ope
