#include "ope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ope/errors.hpp"
#include "ope/numeric.hpp"

namespace ope {

namespace {

void check_same_keys(const ValueMap& truths, const ValueMap& estimates, const std::string& where) {
  if (truths.size() != estimates.size())
    throw ParameterError(where + ": truths and estimates cover different policy sets");
  for (const auto& [id, value] : estimates) {
    (void)value;
    if (truths.find(id) == truths.end())
      throw ParameterError(where + ": policy '" + id + "' has an estimate but no true value");
  }
}

std::vector<double> portfolio_truths(const ValueMap& truths, const std::vector<std::string>& ids,
                                     const std::string& where) {
  std::vector<double> values;
  values.reserve(ids.size());
  for (const std::string& id : ids) {
    const auto it = truths.find(id);
    if (it == truths.end()) throw ParameterError(where + ": no true value for policy '" + id + "'");
    values.push_back(it->second);
  }
  return values;
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t p = i; p <= j; ++p) ranks[order[p]] = shared;
    i = j + 1;
  }
  return ranks;
}

double max_value(const ValueMap& m) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : m) {
    (void)id;
    best = std::max(best, v);
  }
  return best;
}

double min_value(const ValueMap& m) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : m) {
    (void)id;
    worst = std::min(worst, v);
  }
  return worst;
}

/// max{max J, max J - min J}; the squared variant guards nMSE. The first arm
/// applies when performances are always positive, the second covers
/// negative-valued tasks.
double scale_guard(const ValueMap& truths) {
  return std::max(max_value(truths), max_value(truths) - min_value(truths));
}

}  // namespace

std::string to_string(SharpeTag tag) {
  switch (tag) {
    case SharpeTag::finite: return "finite";
    case SharpeTag::zero_over_zero: return "zero_over_zero";
    case SharpeTag::pos_inf: return "pos_inf";
    case SharpeTag::neg_inf: return "neg_inf";
  }
  throw ParameterError("unknown sharpe tag");
}

PolicyPortfolio select_top_k(const ValueMap& estimates, int k, std::string estimator_kind) {
  const int count = static_cast<int>(estimates.size());
  if (k < 1 || k > count)
    throw ParameterError("select_top_k: k = " + std::to_string(k) + " is outside [1, " + std::to_string(count) + "]");
  std::vector<std::pair<std::string, double>> ranked(estimates.begin(), estimates.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  PolicyPortfolio portfolio;
  portfolio.k = k;
  portfolio.estimator_kind = std::move(estimator_kind);
  portfolio.ids.reserve(k);
  for (int i = 0; i < k; ++i) portfolio.ids.push_back(ranked[i].first);
  return portfolio;
}

SharpeResult sharpe_ratio_at_k(const ValueMap& truths, const ValueMap& estimates, int k, double baseline,
                               bool force_baseline, const std::string& baseline_id) {
  check_same_keys(truths, estimates, "sharpe_ratio_at_k");
  PolicyPortfolio portfolio = select_top_k(estimates, k);
  if (force_baseline && !baseline_id.empty() &&
      std::find(portfolio.ids.begin(), portfolio.ids.end(), baseline_id) == portfolio.ids.end()) {
    portfolio.ids.back() = baseline_id;
  }
  const std::vector<double> values = portfolio_truths(truths, portfolio.ids, "sharpe_ratio_at_k");

  SharpeResult out;
  out.numerator = *std::max_element(values.begin(), values.end()) - baseline;
  out.denominator = population_stddev(values);
  if (out.denominator > 0.0) {
    out.tag = SharpeTag::finite;
    out.ratio = out.numerator / out.denominator;
  } else if (out.numerator == 0.0) {
    out.tag = SharpeTag::zero_over_zero;
    out.ratio = 0.0;
  } else if (out.numerator > 0.0) {
    out.tag = SharpeTag::pos_inf;
    out.ratio = std::numeric_limits<double>::infinity();
  } else {
    out.tag = SharpeTag::neg_inf;
    out.ratio = -std::numeric_limits<double>::infinity();
  }
  return out;
}

PortfolioStats portfolio_reference_stats(const ValueMap& truths, const ValueMap& estimates, int k_max,
                                         double baseline) {
  check_same_keys(truths, estimates, "portfolio_reference_stats");
  const PolicyPortfolio full = select_top_k(estimates, k_max);
  const std::vector<double> ranked_truths = portfolio_truths(truths, full.ids, "portfolio_reference_stats");

  PortfolioStats stats;
  stats.baseline = baseline;
  for (int k = 1; k <= k_max; ++k) {
    const std::span<const double> prefix(ranked_truths.data(), static_cast<std::size_t>(k));
    stats.best.push_back(*std::max_element(prefix.begin(), prefix.end()));
    stats.worst.push_back(*std::min_element(prefix.begin(), prefix.end()));
    stats.mean.push_back(pairwise_sum(prefix) / static_cast<double>(k));
    stats.stddev.push_back(population_stddev(prefix));
    stats.kth_best.push_back(ranked_truths[k - 1]);
  }
  return stats;
}

double n_mse(const ValueMap& truths, const ValueMap& estimates) {
  check_same_keys(truths, estimates, "n_mse");
  if (truths.empty()) throw ParameterError("n_mse: empty policy set");
  const double guard = scale_guard(truths);
  const double denom = guard * guard;
  if (!(denom > 0.0))
    throw DegenerateInstanceError("n_mse: normalization denominator is zero (all true values are zero)");
  std::vector<double> sq;
  sq.reserve(truths.size());
  for (const auto& [id, truth] : truths) {
    const double err = estimates.at(id) - truth;
    sq.push_back(err * err);
  }
  return pairwise_sum(sq) / (static_cast<double>(truths.size()) * denom);
}

double rank_corr(const ValueMap& truths, const ValueMap& estimates) {
  check_same_keys(truths, estimates, "rank_corr");
  if (truths.size() < 2) throw ParameterError("rank_corr: needs at least two policies");
  std::vector<double> xs, ys;
  xs.reserve(truths.size());
  ys.reserve(truths.size());
  for (const auto& [id, truth] : truths) {
    xs.push_back(truth);
    ys.push_back(estimates.at(id));
  }
  return spearman_rank_correlation(xs, ys);
}

double n_regret_at_k(const ValueMap& truths, const ValueMap& estimates, int k) {
  check_same_keys(truths, estimates, "n_regret_at_k");
  const double denom = scale_guard(truths);
  if (!(denom > 0.0))
    throw DegenerateInstanceError("n_regret_at_k: normalization denominator is zero (all true values are zero)");
  const PolicyPortfolio portfolio = select_top_k(estimates, k);
  const std::vector<double> values = portfolio_truths(truths, portfolio.ids, "n_regret_at_k");
  const double best_in_portfolio = *std::max_element(values.begin(), values.end());
  return (max_value(truths) - best_in_portfolio) / denom;
}

double spearman_rank_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ParameterError("spearman: length mismatch");
  if (xs.size() < 2) throw ParameterError("spearman: needs at least two samples");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    cov += dx * dy;
    var_x += dx * dx;
    var_y += dy * dy;
  }
  if (!(var_x > 0.0) || !(var_y > 0.0))
    throw UndefinedCorrelationError("spearman: correlation undefined for a constant vector");
  return cov / std::sqrt(var_x * var_y);
}

}  // namespace ope
