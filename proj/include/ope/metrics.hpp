#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace ope {

using ValueMap = std::map<std::string, double>;

/// Top-k candidates ranked by estimated value, descending; ties broken by
/// ascending policy id.
struct PolicyPortfolio {
  std::vector<std::string> ids;
  int k = 0;
  std::string estimator_kind;
};

PolicyPortfolio select_top_k(const ValueMap& estimates, int k, std::string estimator_kind = "");

enum class SharpeTag { finite, zero_over_zero, pos_inf, neg_inf };

std::string to_string(SharpeTag tag);

/// SharpeRatio@k = (best@k - J(pi_b)) / std@k, with its decomposition.
/// Zero denominators follow the fixed degeneracy convention:
/// 0/0 -> ratio 0, +x/0 -> +inf sentinel, -x/0 -> -inf sentinel; never NaN.
struct SharpeResult {
  double ratio = 0.0;  // meaningful only when tag == finite or zero_over_zero
  double numerator = 0.0;
  double denominator = 0.0;
  SharpeTag tag = SharpeTag::finite;
};

/// best@k is the highest true value inside the estimator's top-k portfolio;
/// std@k is the population standard deviation (divide by k) of the
/// portfolio's true values. With `force_baseline`, a portfolio that excludes
/// `baseline_id` has its last slot replaced by it.
SharpeResult sharpe_ratio_at_k(const ValueMap& truths, const ValueMap& estimates, int k, double baseline,
                               bool force_baseline = false, const std::string& baseline_id = "");

/// Reference statistics of the top-k portfolio for k = 1..K: best@k,
/// worst@k, mean@k, std@k and the true value of the k-th ranked policy.
struct PortfolioStats {
  std::vector<double> best, worst, mean, stddev, kth_best;
  double baseline = 0.0;
  int k_max() const { return static_cast<int>(best.size()); }
};

PortfolioStats portfolio_reference_stats(const ValueMap& truths, const ValueMap& estimates, int k_max,
                                         double baseline);

/// nMSE = sum (Jhat - J)^2 / (|Pi| * max{(max J)^2, (max J - min J)^2}).
double n_mse(const ValueMap& truths, const ValueMap& estimates);

/// Spearman rank correlation between truths and estimates, average ranks on
/// ties. Throws UndefinedCorrelationError when either vector is constant.
double rank_corr(const ValueMap& truths, const ValueMap& estimates);

/// nRegret@k = (max J - max_{pi in top-k} J) / max{max J, max J - min J}.
double n_regret_at_k(const ValueMap& truths, const ValueMap& estimates, int k);

/// Spearman rho over two aligned samples (utility shared with the bench's
/// cross-metric comparison). Average ranks on ties.
double spearman_rank_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace ope
