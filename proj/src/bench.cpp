#include "ope/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "ope/dataset.hpp"
#include "ope/errors.hpp"
#include "ope/hash.hpp"
#include "ope/oracle.hpp"
#include "ope/rng.hpp"
#include "ope/version.hpp"

namespace ope {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

Json resolve_ref(const Json& j, const std::filesystem::path& base_dir) {
  if (j.is_object() && j.contains("file")) {
    return load_json_file(base_dir / j.at("file").get<std::string>());
  }
  return j;
}

FitMode fit_mode_from_string(const std::string& s) {
  if (s == "empirical") return FitMode::empirical;
  if (s == "oracle") return FitMode::oracle;
  throw ParseError("unknown fit mode '" + s + "'");
}

TimeMode time_mode_from_string(const std::string& s) {
  if (s == "averaged") return TimeMode::averaged;
  if (s == "per_step") return TimeMode::per_step;
  throw ParseError("unknown time mode '" + s + "'");
}

MdrBootstrap mdr_bootstrap_from_string(const std::string& s) {
  if (s == "current_state") return MdrBootstrap::current_state;
  if (s == "next_state") return MdrBootstrap::next_state;
  throw ParseError("unknown mdr_bootstrap '" + s + "'");
}

/// Base q-tables derived from the exact Q-functions of three hand-designed
/// reference policies (uniform, reward-greedy, reward-averse). Stands in for
/// the trained candidate generators of full-scale experiments.
std::vector<CandidateSuiteConfig::Base> reference_bases(const TabularMdp& mdp) {
  std::vector<CandidateSuiteConfig::Base> bases;
  const Matrix uniform = Matrix::Constant(mdp.num_states, mdp.num_actions,
                                          1.0 / static_cast<double>(mdp.num_actions));
  const std::vector<std::pair<std::string, Policy>> references = {
      {"refq-uniform", Policy::tabular("ref-uniform", uniform)},
      {"refq-greedy", make_epsilon_greedy_policy(mdp.reward_mean, 0.2, "ref-greedy")},
      {"refq-averse", make_epsilon_greedy_policy(Matrix(-mdp.reward_mean), 0.2, "ref-averse")},
  };
  for (const auto& [id, policy] : references) {
    const QFunction q = exact_q_function(mdp, policy);
    bases.push_back({id, q.values.front()});
  }
  return bases;
}

MetricValue sharpe_ratio_metric_value(const SharpeResult& r) {
  switch (r.tag) {
    case SharpeTag::pos_inf: return {MetricValue::Status::pos_inf, 0.0, ""};
    case SharpeTag::neg_inf: return {MetricValue::Status::neg_inf, 0.0, ""};
    case SharpeTag::zero_over_zero: return {MetricValue::Status::ok, 0.0, "zero_over_zero"};
    case SharpeTag::finite: return MetricValue::ok(r.ratio);
  }
  throw ParameterError("unknown sharpe tag");
}

Json metric_value_to_json(const MetricValue& v) {
  Json j;
  switch (v.status) {
    case MetricValue::Status::ok:
      j["status"] = "ok";
      j["value"] = v.value;
      break;
    case MetricValue::Status::pos_inf:
      j["status"] = "ok";
      j["value"] = "+inf";
      break;
    case MetricValue::Status::neg_inf:
      j["status"] = "ok";
      j["value"] = "-inf";
      break;
    case MetricValue::Status::skipped:
      j["status"] = "skipped";
      break;
  }
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

Json sharpe_to_json(const SharpeResult& r) {
  Json j;
  j["numerator"] = r.numerator;
  j["denominator"] = r.denominator;
  j["tag"] = to_string(r.tag);
  if (r.tag == SharpeTag::pos_inf) {
    j["ratio"] = "+inf";
  } else if (r.tag == SharpeTag::neg_inf) {
    j["ratio"] = "-inf";
  } else {
    j["ratio"] = r.ratio;
  }
  return j;
}

Json portfolio_to_json(const PortfolioStats& p) {
  Json j;
  j["baseline"] = p.baseline;
  j["best"] = p.best;
  j["worst"] = p.worst;
  j["mean"] = p.mean;
  j["std"] = p.stddev;
  j["kth_best"] = p.kth_best;
  return j;
}

struct ResolvedKs {
  std::vector<int> sharpe_ks;   // ks for sharpe curves
  std::vector<int> nregret_ks;  // always contains 1
  int k_max = 0;
  int reference_k = 0;
};

ResolvedKs resolve_ks(const MetricConfig& cfg, int num_candidates) {
  ResolvedKs out;
  out.k_max = cfg.k_max > 0 ? std::min(cfg.k_max, num_candidates) : num_candidates;
  if (cfg.k_list.empty()) {
    for (int k = 1; k <= out.k_max; ++k) out.sharpe_ks.push_back(k);
  } else {
    for (int k : cfg.k_list)
      if (k >= 1 && k <= num_candidates) out.sharpe_ks.push_back(k);
  }
  out.reference_k = std::clamp(cfg.reference_k, 1, num_candidates);
  if (std::find(out.sharpe_ks.begin(), out.sharpe_ks.end(), out.reference_k) == out.sharpe_ks.end())
    out.sharpe_ks.push_back(out.reference_k);
  std::sort(out.sharpe_ks.begin(), out.sharpe_ks.end());
  out.sharpe_ks.erase(std::unique(out.sharpe_ks.begin(), out.sharpe_ks.end()), out.sharpe_ks.end());
  out.nregret_ks = out.sharpe_ks;
  if (std::find(out.nregret_ks.begin(), out.nregret_ks.end(), 1) == out.nregret_ks.end())
    out.nregret_ks.insert(out.nregret_ks.begin(), 1);
  return out;
}

SeedMetrics compute_seed_metrics(const ValueMap& truths, const ValueMap& estimates, double baseline,
                                 const std::string& baseline_id, const ResolvedKs& ks,
                                 bool force_baseline) {
  SeedMetrics out;
  try {
    out.nmse = MetricValue::ok(n_mse(truths, estimates));
  } catch (const Error& e) {
    out.nmse = MetricValue::skipped(e.what());
  }
  try {
    out.rankcorr = MetricValue::ok(rank_corr(truths, estimates));
  } catch (const Error& e) {
    out.rankcorr = MetricValue::skipped(e.what());
  }
  for (const int k : ks.nregret_ks) {
    try {
      out.nregret[k] = MetricValue::ok(n_regret_at_k(truths, estimates, k));
    } catch (const Error& e) {
      out.nregret[k] = MetricValue::skipped(e.what());
    }
  }
  for (const int k : ks.sharpe_ks)
    out.sharpe[k] = sharpe_ratio_at_k(truths, estimates, k, baseline, force_baseline, baseline_id);
  out.portfolio = portfolio_reference_stats(truths, estimates, ks.k_max, baseline);
  return out;
}

void accumulate(std::map<int, std::vector<double>>& sink, int k, const MetricValue& v,
                std::map<int, AggregateValue>& agg) {
  AggregateValue& cell = agg[k];
  switch (v.status) {
    case MetricValue::Status::ok:
      sink[k].push_back(v.value);
      ++cell.n_used;
      break;
    case MetricValue::Status::pos_inf:
      ++cell.n_pos_inf;
      break;
    case MetricValue::Status::neg_inf:
      ++cell.n_neg_inf;
      break;
    case MetricValue::Status::skipped:
      ++cell.n_skipped;
      break;
  }
}

void finalize(std::map<int, std::vector<double>>& sink, std::map<int, AggregateValue>& agg) {
  for (auto& [k, values] : sink) {
    AggregateValue& cell = agg[k];
    if (values.empty()) continue;
    const MeanStdError stats = mean_and_std_error(values);
    cell.mean = stats.mean;
    cell.std = stats.std_error * std::sqrt(static_cast<double>(values.size()));  // sample std
  }
}

/// Orientation convention: transforms every metric into "larger is better".
double oriented_score(const std::string& metric, const MetricValue& v) {
  double raw;
  switch (v.status) {
    case MetricValue::Status::ok: raw = v.value; break;
    case MetricValue::Status::pos_inf: raw = std::numeric_limits<double>::infinity(); break;
    case MetricValue::Status::neg_inf: raw = -std::numeric_limits<double>::infinity(); break;
    default: throw ParameterError("oriented_score: skipped value");
  }
  if (metric == "n_mse" || metric == "n_regret") return -raw;
  return raw;  // sharpe_ratio, rank_corr: higher is better
}

const MetricValue& metric_value_of(const SeedMetrics& m, const std::string& metric, int k) {
  static const MetricValue empty = MetricValue::skipped("metric not computed");
  if (metric == "n_mse") return m.nmse;
  if (metric == "rank_corr") return m.rankcorr;
  if (metric == "n_regret") {
    const auto it = m.nregret.find(k);
    return it == m.nregret.end() ? empty : it->second;
  }
  throw ParameterError("unknown metric '" + metric + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  mdp.validate();
  if (seeds.empty()) throw ParameterError("config: seeds must be nonempty");
  if (std::set<long>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ParameterError("config: seeds must be distinct");
  if (n_trajectories < 1) throw ParameterError("config: n_trajectories must be >= 1");
  if (parallelism < 1) throw ParameterError("config: parallelism must be >= 1");
  if (suite.explicit_policies.empty()) {
    if (!suite.reference_bases && suite.bases.empty())
      throw ParameterError("config: candidate suite needs bases or explicit policies");
    if (suite.noise_levels.empty())
      throw ParameterError("config: perturbation grid is empty");
    if (suite.style != "epsilon_greedy" && suite.style != "perturb_softmax")
      throw ParameterError("config: unknown candidate style '" + suite.style + "'");
  }
  if (suite.subsample < 0) throw ParameterError("config: subsample must be nonnegative");
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  const std::string ctx = "ExperimentConfig";
  ExperimentConfig cfg;
  cfg.mdp = TabularMdp::from_json(resolve_ref(require_field(j, "mdp", ctx), base_dir));
  cfg.behavior = Policy::from_json(resolve_ref(require_field(j, "behavior_policy", ctx), base_dir));
  cfg.n_trajectories = require_field(j, "n_trajectories", ctx).get<int>();
  for (const auto& s : require_field(j, "seeds", ctx)) cfg.seeds.push_back(s.get<long>());
  cfg.parallelism = j.value("parallelism", 1);

  const Json& cands = require_field(j, "candidates", ctx);
  if (cands.contains("explicit")) {
    for (const auto& pj : cands.at("explicit"))
      cfg.suite.explicit_policies.push_back(Policy::from_json(resolve_ref(pj, base_dir)));
  } else {
    const Json& bases = require_field(cands, "bases", ctx + ".candidates");
    if (bases.is_string() && bases.get<std::string>() == "reference") {
      cfg.suite.reference_bases = true;
    } else {
      for (const auto& bj : bases) {
        CandidateSuiteConfig::Base base;
        base.id = require_field(bj, "id", ctx + ".candidates.bases").get<std::string>();
        base.q = matrix_from_json(require_field(bj, "q", ctx + ".candidates.bases"), ctx + ".bases.q");
        cfg.suite.bases.push_back(std::move(base));
      }
    }
    for (const auto& v : require_field(cands, "noise_levels", ctx + ".candidates"))
      cfg.suite.noise_levels.push_back(v.get<double>());
    cfg.suite.style = cands.value("style", "epsilon_greedy");
    cfg.suite.softmax_temperature = cands.value("softmax_temperature", 1.0);
    cfg.suite.subsample = cands.value("subsample", 0);
    cfg.suite.suite_seed = cands.value("suite_seed", std::uint64_t{0});
  }

  if (j.contains("estimator")) {
    const Json& ej = j.at("estimator");
    cfg.estimator.q_mode = fit_mode_from_string(ej.value("q_mode", "empirical"));
    cfg.estimator.weight_mode = fit_mode_from_string(ej.value("weight_mode", "empirical"));
    cfg.estimator.time_mode = time_mode_from_string(ej.value("time_mode", "averaged"));
    cfg.estimator.self_normalize = ej.value("self_normalize", true);
    cfg.estimator.bandwidth = ej.value("bandwidth", 0.3);
    cfg.estimator.mdr_bootstrap = mdr_bootstrap_from_string(ej.value("mdr_bootstrap", "next_state"));
  }
  if (j.contains("metrics")) {
    const Json& mj = j.at("metrics");
    if (mj.contains("k_list"))
      for (const auto& k : mj.at("k_list")) cfg.metrics.k_list.push_back(k.get<int>());
    cfg.metrics.k_max = mj.value("k_max", 0);
    cfg.metrics.reference_k = mj.value("reference_k", 5);
    cfg.metrics.force_baseline_in_portfolio = mj.value("force_baseline_in_portfolio", false);
  }
  cfg.validate();
  return cfg;
}

Json ExperimentConfig::to_json() const {
  // Canonical experiment definition. Execution options (parallelism) are
  // deliberately excluded so that parallel and serial runs of the same
  // experiment carry the same provenance hash.
  Json j;
  j["mdp"] = mdp.to_json();
  j["behavior_policy"] = behavior.to_json();
  j["n_trajectories"] = n_trajectories;
  j["seeds"] = seeds;

  Json cands;
  if (!suite.explicit_policies.empty()) {
    Json list = Json::array();
    for (const Policy& p : suite.explicit_policies) list.push_back(p.to_json());
    cands["explicit"] = std::move(list);
  } else {
    if (suite.reference_bases) {
      cands["bases"] = "reference";
    } else {
      Json bases = Json::array();
      for (const auto& base : suite.bases) {
        Json bj;
        bj["id"] = base.id;
        bj["q"] = ope::to_json(base.q);
        bases.push_back(std::move(bj));
      }
      cands["bases"] = std::move(bases);
    }
    cands["noise_levels"] = suite.noise_levels;
    cands["style"] = suite.style;
    cands["softmax_temperature"] = suite.softmax_temperature;
    cands["subsample"] = suite.subsample;
    cands["suite_seed"] = suite.suite_seed;
  }
  j["candidates"] = std::move(cands);

  Json ej;
  ej["q_mode"] = to_string(estimator.q_mode);
  ej["weight_mode"] = to_string(estimator.weight_mode);
  ej["time_mode"] = to_string(estimator.time_mode);
  ej["self_normalize"] = estimator.self_normalize;
  ej["bandwidth"] = estimator.bandwidth;
  ej["mdr_bootstrap"] = to_string(estimator.mdr_bootstrap);
  j["estimator"] = std::move(ej);

  Json mj;
  mj["k_list"] = metrics.k_list;
  mj["k_max"] = metrics.k_max;
  mj["reference_k"] = metrics.reference_k;
  mj["force_baseline_in_portfolio"] = metrics.force_baseline_in_portfolio;
  j["metrics"] = std::move(mj);
  return j;
}

std::string ExperimentConfig::config_hash() const { return sha256_hex(to_json().dump()); }

std::vector<Policy> build_candidate_suite(const ExperimentConfig& config) {
  const CandidateSuiteConfig& suite = config.suite;
  std::vector<Policy> grid;

  if (!suite.explicit_policies.empty()) {
    grid = suite.explicit_policies;
  } else {
    const std::vector<CandidateSuiteConfig::Base> bases =
        suite.reference_bases ? reference_bases(config.mdp) : suite.bases;
    RngStream perturb_stream(suite.suite_seed, "candidate-perturb");
    std::uint64_t index = 0;
    for (const auto& base : bases) {
      for (const double level : suite.noise_levels) {
        if (suite.style == "epsilon_greedy") {
          grid.push_back(make_epsilon_greedy_policy(base.q, level, base.id + "-e" + format_level(level)));
        } else {
          const Policy smooth = make_softmax_policy(base.q, suite.softmax_temperature, base.id);
          grid.push_back(perturb_policy(smooth, level, perturb_stream.derive(index))
                             .with_id(base.id + "-p" + format_level(level)));
        }
        ++index;
      }
    }
  }

  if (suite.subsample > 0) {
    if (suite.subsample > static_cast<int>(grid.size()))
      throw ParameterError("build_candidate_suite: subsample size " + std::to_string(suite.subsample) +
                           " exceeds grid size " + std::to_string(grid.size()));
    RngStream stream(suite.suite_seed, "candidate-subsample");
    // Partial Fisher-Yates: the first `subsample` slots become the sample.
    for (int i = 0; i < suite.subsample; ++i) {
      const auto j = i + static_cast<int>(stream.uniform_below(grid.size() - i));
      std::swap(grid[i], grid[j]);
    }
    grid.erase(grid.begin() + suite.subsample, grid.end());
  }

  bool has_behavior = false;
  for (const Policy& p : grid)
    if (p.id() == config.behavior.id()) has_behavior = true;
  if (!has_behavior) grid.push_back(config.behavior);

  std::set<std::string> ids;
  for (const Policy& p : grid)
    if (!ids.insert(p.id()).second)
      throw ParameterError("build_candidate_suite: duplicate policy id '" + p.id() + "'");
  return grid;
}

AggregateReport run_experiment(const ExperimentConfig& config, const EstimateInjector* injector) {
  config.validate();

  EstimatorConfig est = config.estimator;
  est.mdp = &config.mdp;
  est.behavior = &config.behavior;

  const std::vector<Policy> candidates = build_candidate_suite(config);
  ValueMap truths;
  for (const Policy& p : candidates) truths[p.id()] = exact_policy_value(config.mdp, p);
  const double baseline_value = exact_policy_value(config.mdp, config.behavior);
  const ResolvedKs ks = resolve_ks(config.metrics, static_cast<int>(candidates.size()));

  AggregateReport report;
  report.config_hash = config.config_hash();
  report.version = kVersion;
  report.mdp_id = config.mdp.id;
  report.baseline_id = config.behavior.id();
  report.baseline_value = baseline_value;
  report.truths = truths;
  report.seeds = config.seeds;
  report.metric_config = config.metrics;
  report.reference_k = ks.reference_k;
  report.per_seed.resize(config.seeds.size());

  auto run_seed = [&](std::size_t index) {
    const long seed = config.seeds[index];
    SeedResult& result = report.per_seed[index];
    result.seed = seed;
    try {
      const LoggedDataset ds = generate_logged_dataset(
          config.mdp, config.behavior, config.n_trajectories,
          RngStream(static_cast<std::uint64_t>(seed), "dataset"), seed);

      // Oracle truths must not depend on the seed.
      for (const Policy& p : candidates) {
        if (exact_policy_value(config.mdp, p) != truths.at(p.id()))
          throw Error("run_experiment: oracle truth changed across seeds for policy '" + p.id() + "'");
      }

      result.estimates = injector != nullptr ? (*injector)(ds, candidates, seed)
                                             : run_all_estimators(ds, candidates, est);

      for (const std::string& estimator : result.estimates.estimators()) {
        ValueMap estimates;
        for (const Policy& p : candidates) estimates[p.id()] = result.estimates.at(estimator, p.id());
        result.metrics[estimator] =
            compute_seed_metrics(truths, estimates, baseline_value, config.behavior.id(), ks,
                                 config.metrics.force_baseline_in_portfolio);
      }
    } catch (const Error& e) {
      result.failed = true;
      result.failure = e.what();
    }
  };

  if (config.parallelism <= 1 || config.seeds.size() < 2) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) run_seed(i);
  } else {
    const int workers = std::min<int>(config.parallelism, static_cast<int>(config.seeds.size()));
    std::vector<std::thread> pool;
    const std::size_t chunk = (config.seeds.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      const std::size_t end = std::min(config.seeds.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        for (std::size_t i = begin; i < end; ++i) run_seed(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  report.partial = std::any_of(report.per_seed.begin(), report.per_seed.end(),
                               [](const SeedResult& r) { return r.failed; });

  std::set<std::string> estimator_set;
  for (const SeedResult& r : report.per_seed)
    for (const auto& [name, metrics] : r.metrics) {
      (void)metrics;
      estimator_set.insert(name);
    }
  report.estimator_names.assign(estimator_set.begin(), estimator_set.end());

  // Aggregate mean/std over seeds, per estimator x metric x k.
  for (const std::string& estimator : report.estimator_names) {
    auto& agg = report.aggregate[estimator];
    std::map<std::string, std::map<int, std::vector<double>>> sink;
    for (const SeedResult& r : report.per_seed) {
      if (r.failed) continue;
      const auto it = r.metrics.find(estimator);
      if (it == r.metrics.end()) continue;
      const SeedMetrics& m = it->second;
      accumulate(sink["n_mse"], 0, m.nmse, agg["n_mse"]);
      accumulate(sink["rank_corr"], 0, m.rankcorr, agg["rank_corr"]);
      for (const auto& [k, v] : m.nregret) accumulate(sink["n_regret"], k, v, agg["n_regret"]);
      for (const auto& [k, s] : m.sharpe) {
        accumulate(sink["sharpe_ratio"], k, sharpe_ratio_metric_value(s), agg["sharpe_ratio"]);
        accumulate(sink["sharpe_numerator"], k, MetricValue::ok(s.numerator), agg["sharpe_numerator"]);
        accumulate(sink["sharpe_denominator"], k, MetricValue::ok(s.denominator), agg["sharpe_denominator"]);
      }
      for (int k = 1; k <= m.portfolio.k_max(); ++k) {
        accumulate(sink["portfolio_best"], k, MetricValue::ok(m.portfolio.best[k - 1]), agg["portfolio_best"]);
        accumulate(sink["portfolio_worst"], k, MetricValue::ok(m.portfolio.worst[k - 1]), agg["portfolio_worst"]);
        accumulate(sink["portfolio_mean"], k, MetricValue::ok(m.portfolio.mean[k - 1]), agg["portfolio_mean"]);
        accumulate(sink["portfolio_std"], k, MetricValue::ok(m.portfolio.stddev[k - 1]), agg["portfolio_std"]);
        accumulate(sink["portfolio_kth_best"], k, MetricValue::ok(m.portfolio.kth_best[k - 1]),
                   agg["portfolio_kth_best"]);
      }
    }
    for (auto& [metric, by_k] : sink) finalize(by_k, agg[metric]);
  }

  if (report.estimator_names.size() >= 2)
    cross_metric_comparison(report, "sharpe_ratio", ks.reference_k);
  return report;
}

std::map<std::string, CrossMetricEntry> cross_metric_comparison(AggregateReport& report,
                                                                const std::string& reference_metric,
                                                                int reference_k) {
  if (report.estimator_names.size() < 2)
    throw ParameterError("cross_metric_comparison: needs at least two estimators");

  report.reference_metric = reference_metric;
  report.reference_k = reference_k;

  auto reference_score = [&](const SeedMetrics& m) -> double {
    if (reference_metric == "sharpe_ratio") {
      const auto it = m.sharpe.find(reference_k);
      if (it == m.sharpe.end()) throw ParameterError("cross_metric_comparison: sharpe@k missing for reference_k");
      return oriented_score("sharpe_ratio", sharpe_ratio_metric_value(it->second));
    }
    return oriented_score(reference_metric, metric_value_of(m, reference_metric, 1));
  };

  const std::vector<std::string> conventional = {"rank_corr", "n_mse", "n_regret"};
  std::map<std::string, CrossMetricEntry> out;

  for (const std::string& metric : conventional) {
    if (metric == reference_metric) continue;
    CrossMetricEntry entry;
    entry.n_seeds = static_cast<int>(report.per_seed.size());
    std::vector<double> rhos;
    for (const SeedResult& r : report.per_seed) {
      if (r.failed) {
        ++entry.excluded;
        continue;
      }
      std::vector<double> ref_scores, metric_scores;
      bool usable = true;
      for (const std::string& estimator : report.estimator_names) {
        const auto it = r.metrics.find(estimator);
        if (it == r.metrics.end()) {
          usable = false;
          break;
        }
        const MetricValue& mv = metric_value_of(it->second, metric, 1);
        if (mv.status == MetricValue::Status::skipped) {
          usable = false;
          break;
        }
        try {
          ref_scores.push_back(reference_score(it->second));
        } catch (const Error&) {
          usable = false;
          break;
        }
        metric_scores.push_back(oriented_score(metric, mv));
      }
      if (!usable) {
        ++entry.excluded;
        continue;
      }
      // Best estimator under each side; ties go to the lexicographically
      // smallest name (estimator_names is sorted). Disagreements are counted
      // even when the correlation below is undefined: the exclusion count
      // concerns the Spearman mean only.
      std::size_t best_ref = 0, best_metric = 0;
      for (std::size_t e = 1; e < report.estimator_names.size(); ++e) {
        if (ref_scores[e] > ref_scores[best_ref]) best_ref = e;
        if (metric_scores[e] > metric_scores[best_metric]) best_metric = e;
      }
      if (best_ref != best_metric) ++entry.disagreements;
      try {
        rhos.push_back(spearman_rank_correlation(ref_scores, metric_scores));
      } catch (const UndefinedCorrelationError&) {
        ++entry.excluded;
      }
    }
    if (!rhos.empty()) {
      const MeanStdError stats = mean_and_std_error(rhos);
      entry.spearman_mean = stats.mean;
      entry.spearman_std = stats.std_error * std::sqrt(static_cast<double>(rhos.size()));
    }
    out[metric] = entry;
  }

  report.cross_metric = out;
  return out;
}

Json AggregateReport::to_json() const {
  Json j;
  j["config_hash"] = config_hash;
  j["version"] = version;
  j["mdp_id"] = mdp_id;
  j["baseline"] = Json{{"policy_id", baseline_id}, {"value", baseline_value}};
  j["truths"] = truths;
  j["seeds"] = seeds;
  j["partial"] = partial;

  Json failures = Json::array();
  for (const SeedResult& r : per_seed)
    if (r.failed) failures.push_back(Json{{"seed", r.seed}, {"error", r.failure}});
  j["failures"] = std::move(failures);

  Json per_seed_json = Json::array();
  for (const SeedResult& r : per_seed) {
    Json sj;
    sj["seed"] = r.seed;
    sj["failed"] = r.failed;
    if (r.failed) {
      sj["error"] = r.failure;
      per_seed_json.push_back(std::move(sj));
      continue;
    }
    Json estimates;
    for (const EstimateRow& row : r.estimates.rows) estimates[row.estimator][row.policy_id] = row.estimate;
    sj["estimates"] = std::move(estimates);
    Json metrics_json;
    for (const auto& [estimator, m] : r.metrics) {
      Json mj;
      mj["n_mse"] = metric_value_to_json(m.nmse);
      mj["rank_corr"] = metric_value_to_json(m.rankcorr);
      Json nregret;
      for (const auto& [k, v] : m.nregret) nregret[std::to_string(k)] = metric_value_to_json(v);
      mj["n_regret"] = std::move(nregret);
      Json sharpe;
      for (const auto& [k, s] : m.sharpe) sharpe[std::to_string(k)] = sharpe_to_json(s);
      mj["sharpe_ratio"] = std::move(sharpe);
      mj["portfolio"] = portfolio_to_json(m.portfolio);
      metrics_json[estimator] = std::move(mj);
    }
    sj["metrics"] = std::move(metrics_json);
    per_seed_json.push_back(std::move(sj));
  }
  j["per_seed"] = std::move(per_seed_json);

  Json agg;
  for (const auto& [estimator, metrics] : aggregate) {
    Json ej;
    for (const auto& [metric, by_k] : metrics) {
      Json mk;
      for (const auto& [k, cell] : by_k) {
        Json cj;
        cj["mean"] = cell.mean;
        cj["std"] = cell.std;
        cj["n_used"] = cell.n_used;
        cj["n_pos_inf"] = cell.n_pos_inf;
        cj["n_neg_inf"] = cell.n_neg_inf;
        cj["n_skipped"] = cell.n_skipped;
        mk[std::to_string(k)] = std::move(cj);
      }
      ej[metric] = std::move(mk);
    }
    agg[estimator] = std::move(ej);
  }
  j["aggregate"] = std::move(agg);

  Json cross;
  cross["reference_metric"] = reference_metric;
  cross["reference_k"] = reference_k;
  Json cross_metrics;
  for (const auto& [metric, entry] : cross_metric) {
    Json cj;
    cj["spearman_mean"] = entry.spearman_mean;
    cj["spearman_std"] = entry.spearman_std;
    cj["disagreements"] = entry.disagreements;
    cj["excluded"] = entry.excluded;
    cj["n_seeds"] = entry.n_seeds;
    cross_metrics[metric] = std::move(cj);
  }
  cross["metrics"] = std::move(cross_metrics);
  j["cross_metric"] = std::move(cross);
  return j;
}

std::string AggregateReport::to_csv() const {
  std::string out = "estimator,metric,k,seed,value,status\n";
  auto emit = [&](const std::string& estimator, const std::string& metric, const std::string& k, long seed,
                  const MetricValue& v) {
    std::string value, status;
    switch (v.status) {
      case MetricValue::Status::ok:
        value = format_double(v.value);
        status = "ok";
        break;
      case MetricValue::Status::pos_inf:
        value = "+inf";
        status = "ok";
        break;
      case MetricValue::Status::neg_inf:
        value = "-inf";
        status = "ok";
        break;
      case MetricValue::Status::skipped:
        status = "skipped";
        break;
    }
    out += estimator + "," + metric + "," + k + "," + std::to_string(seed) + "," + value + "," + status + "\n";
  };

  for (const SeedResult& r : per_seed) {
    if (r.failed) continue;
    for (const auto& [estimator, m] : r.metrics) {
      emit(estimator, "n_mse", "", r.seed, m.nmse);
      emit(estimator, "rank_corr", "", r.seed, m.rankcorr);
      for (const auto& [k, v] : m.nregret) emit(estimator, "n_regret", std::to_string(k), r.seed, v);
      for (const auto& [k, s] : m.sharpe) {
        emit(estimator, "sharpe_ratio", std::to_string(k), r.seed, sharpe_ratio_metric_value(s));
        emit(estimator, "sharpe_numerator", std::to_string(k), r.seed, MetricValue::ok(s.numerator));
        emit(estimator, "sharpe_denominator", std::to_string(k), r.seed, MetricValue::ok(s.denominator));
      }
      for (int k = 1; k <= m.portfolio.k_max(); ++k) {
        emit(estimator, "portfolio_best", std::to_string(k), r.seed, MetricValue::ok(m.portfolio.best[k - 1]));
        emit(estimator, "portfolio_worst", std::to_string(k), r.seed, MetricValue::ok(m.portfolio.worst[k - 1]));
        emit(estimator, "portfolio_mean", std::to_string(k), r.seed, MetricValue::ok(m.portfolio.mean[k - 1]));
        emit(estimator, "portfolio_std", std::to_string(k), r.seed, MetricValue::ok(m.portfolio.stddev[k - 1]));
        emit(estimator, "portfolio_kth_best", std::to_string(k), r.seed,
             MetricValue::ok(m.portfolio.kth_best[k - 1]));
      }
    }
  }
  return out;
}

void emit_report(const AggregateReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("emit_report: cannot open '" + path.string() + "' for writing");
  if (format == ReportFormat::json) {
    out << report.to_json().dump(2) << '\n';
  } else {
    out << report.to_csv();
  }
  if (!out) throw ParseError("emit_report: write to '" + path.string() + "' failed");
}

}  // namespace ope
