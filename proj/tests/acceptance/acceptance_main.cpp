// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run via `ctest -R acceptance` or directly.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../helpers.hpp"
#include "ope/bench.hpp"
#include "ope/dataset.hpp"
#include "ope/estimators.hpp"
#include "ope/metrics.hpp"
#include "ope/oracle.hpp"

using namespace ope;
using namespace ope::test;

namespace {

struct Harness {
  int failures = 0;

  void criterion(int number, const std::string& name, const std::function<void(std::vector<std::string>&)>& body) {
    std::vector<std::string> problems;
    const auto start = std::chrono::steady_clock::now();
    try {
      body(problems);
    } catch (const std::exception& e) {
      problems.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count() /
        1000.0;
    if (problems.empty()) {
      std::printf("[PASS] criterion %2d: %s (%.1fs)\n", number, name.c_str(), elapsed);
    } else {
      ++failures;
      std::printf("[FAIL] criterion %2d: %s (%.1fs)\n", number, name.c_str(), elapsed);
      for (const std::string& p : problems) std::printf("       - %s\n", p.c_str());
    }
    std::fflush(stdout);
  }
};

void expect(std::vector<std::string>& problems, bool ok, const std::string& message) {
  if (!ok) problems.push_back(message);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Deterministic conveyor used by the DR-exactness criterion.
TabularMdp deterministic_line() {
  TabularMdp m;
  m.id = "line3";
  m.num_states = 3;
  m.num_actions = 2;
  m.horizon = 4;
  m.discount = 0.9;
  m.initial_dist = Vector::Zero(3);
  m.initial_dist(0) = 1.0;
  Matrix t0 = Matrix::Zero(3, 3), t1 = Matrix::Zero(3, 3);
  t0(0, 1) = 1.0;
  t0(1, 2) = 1.0;
  t0(2, 2) = 1.0;
  t1(0, 0) = 1.0;
  t1(1, 1) = 1.0;
  t1(2, 0) = 1.0;
  m.transition = {t0, t1};
  m.reward_mean = Matrix(3, 2);
  m.reward_mean << 0.0, 0.1,
                   0.5, 0.2,
                   1.0, 0.3;
  m.reward_noise_std = Matrix::Zero(3, 2);
  return m;
}

double trapezoid_kernel_weight(double mu, double sigma, double a_t, double h, double propensity) {
  const double lo = std::min(mu - 9.0 * sigma, a_t - 9.0 * h);
  const double hi = std::max(mu + 9.0 * sigma, a_t + 9.0 * h);
  const int points = 1000001;
  const double step = (hi - lo) / (points - 1);
  const double gauss_norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  const double kernel_norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  double integral = 0.0;
  for (int i = 0; i < points; ++i) {
    const double a = lo + i * step;
    const double zp = (a - mu) / sigma;
    const double zk = (a - a_t) / h;
    const double f = gauss_norm * std::exp(-0.5 * zp * zp) * kernel_norm * std::exp(-0.5 * zk * zk);
    integral += (i == 0 || i == points - 1) ? 0.5 * f : f;
  }
  return integral * step / propensity;
}

}  // namespace

int main() {
  Harness harness;

  // ------------------------------------------------------------------
  harness.criterion(1, "oracle consistency on 20 randomized small MDPs", [](auto& problems) {
    const auto start = std::chrono::steady_clock::now();
    RngStream maker(9100, "acceptance-mdps");
    for (int i = 0; i < 20; ++i) {
      const int S = 2 + static_cast<int>(maker.uniform_below(5));  // <= 6 states
      const int A = 2 + static_cast<int>(maker.uniform_below(2));  // <= 3 actions
      const int T = 2 + static_cast<int>(maker.uniform_below(7));  // <= 8 steps
      const double gamma = 0.85 + 0.15 * maker.uniform01();
      const TabularMdp mdp = random_mdp(S, A, T, maker, 0.4, gamma);

      const std::vector<Policy> policies = {random_policy(S, A, maker, "rand"),
                                            make_softmax_policy(mdp.reward_mean, 0.8, "soft")};
      for (const Policy& policy : policies) {
        const double j = exact_policy_value(mdp, policy);
        const MonteCarloValue mc =
            monte_carlo_policy_value(mdp, policy, 100000, RngStream(7000 + i, "acceptance-mc"));
        expect(problems, mc.std_error > 0.0, "MDP " + std::to_string(i) + ": zero std error");
        expect(problems, std::abs(mc.mean - j) < 4.0 * mc.std_error,
               "MDP " + std::to_string(i) + " policy " + policy.id() + ": |" + fmt(mc.mean) + " - " + fmt(j) +
                   "| >= 4 * " + fmt(mc.std_error));
      }
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count() /
        1000.0;
    expect(problems, elapsed < 120.0, "runtime " + fmt(elapsed) + "s exceeds 2 minutes");
  });

  // ------------------------------------------------------------------
  harness.criterion(2, "on-policy reduction: SNPDIS/SNMIS = mean return, DR(0) = PDIS", [](auto& problems) {
    const TabularMdp m = three_state_reference();
    const Policy b = make_softmax_policy(m.reward_mean, 1.0, "pi_b");
    for (const long seed : {11L, 12L, 13L}) {
      const LoggedDataset ds = generate_logged_dataset(m, b, 5000, RngStream(seed, "dataset"), seed);
      const double avg = average_discounted_return(ds);

      const double snpdis = estimate_pdis(ds, b, true);
      expect(problems, std::abs(snpdis - avg) <= 1e-9,
             "seed " + std::to_string(seed) + ": SNPDIS " + fmt(snpdis) + " != mean return " + fmt(avg));

      const MarginalWeights w = fit_marginal_weights(ds, b, FitMode::oracle, TimeMode::averaged, &m, &b);
      const double snmis = estimate_mis(ds, b, w, true);
      expect(problems, std::abs(snmis - avg) <= 1e-9,
             "seed " + std::to_string(seed) + ": SNMIS " + fmt(snmis) + " != mean return " + fmt(avg));

      const Policy eval = make_epsilon_greedy_policy(m.reward_mean, 0.35, "eval");
      FittedQ zero;
      zero.discount = ds.discount;
      zero.q.assign(ds.horizon, Matrix::Zero(ds.num_states, ds.num_actions));
      expect(problems, estimate_dr(ds, eval, zero, false) == estimate_pdis(ds, eval, false),
             "seed " + std::to_string(seed) + ": plain DR(0) != plain PDIS bit-for-bit");
      expect(problems, estimate_dr(ds, eval, zero, true) == estimate_pdis(ds, eval, true),
             "seed " + std::to_string(seed) + ": SNDR(0) != SNPDIS bit-for-bit");
    }
  });

  // ------------------------------------------------------------------
  harness.criterion(3, "unbiasedness of plain PDIS and oracle-weight MIS over 50 seeds", [](auto& problems) {
    const auto start = std::chrono::steady_clock::now();
    const TabularMdp m = three_state_reference();
    const Policy b = make_softmax_policy(m.reward_mean, 1.2, "pi_b");
    std::vector<Policy> candidates;
    for (const double eps : {0.15, 0.35, 0.55, 0.75, 0.95})
      candidates.push_back(make_epsilon_greedy_policy(m.reward_mean, eps, "eps" + fmt(eps)));

    const int seeds = 50, n = 10000;
    std::vector<std::vector<double>> pdis(candidates.size()), mis(candidates.size());
    for (int s = 0; s < seeds; ++s) {
      const LoggedDataset ds = generate_logged_dataset(m, b, n, RngStream(3000 + s, "dataset"), s);
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        pdis[c].push_back(estimate_pdis(ds, candidates[c], false));
        const MarginalWeights w =
            fit_marginal_weights(ds, candidates[c], FitMode::oracle, TimeMode::per_step, &m, &b);
        mis[c].push_back(estimate_mis(ds, candidates[c], w, false));
      }
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double j = exact_policy_value(m, candidates[c]);
      const MeanStdError ps = mean_and_std_error(pdis[c]);
      expect(problems, std::abs(ps.mean - j) < 3.0 * ps.std_error,
             candidates[c].id() + ": plain PDIS mean " + fmt(ps.mean) + " vs J " + fmt(j) + " (3se " +
                 fmt(3.0 * ps.std_error) + ")");
      const MeanStdError ms = mean_and_std_error(mis[c]);
      expect(problems, std::abs(ms.mean - j) < 3.0 * ms.std_error,
             candidates[c].id() + ": oracle-weight MIS mean " + fmt(ms.mean) + " vs J " + fmt(j) + " (3se " +
                 fmt(3.0 * ms.std_error) + ")");
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count() /
        1000.0;
    expect(problems, elapsed < 300.0, "runtime " + fmt(elapsed) + "s exceeds 5 minutes");
  });

  // ------------------------------------------------------------------
  harness.criterion(4, "DR exactness and SNDR vs SNPDIS variance on deterministic data", [](auto& problems) {
    const TabularMdp m = deterministic_line();
    const Policy b = Policy::tabular("pi_b", Matrix::Constant(3, 2, 0.5));
    Matrix eval_probs(3, 2);
    eval_probs << 0.8, 0.2,
                  0.3, 0.7,
                  0.6, 0.4;
    const Policy eval = Policy::tabular("eval", eval_probs);
    const double j = exact_policy_value(m, eval);

    for (int s = 0; s < 30; ++s) {
      const LoggedDataset single = generate_logged_dataset(m, b, 1, RngStream(4000 + s, "dataset"), s);
      const FittedQ q = fit_fqe(single, eval, FitMode::oracle, &m);
      const double dr = estimate_dr(single, eval, q, false);
      expect(problems, std::abs(dr - j) <= 1e-9,
             "trajectory " + std::to_string(s) + ": DR " + fmt(dr) + " != J " + fmt(j));
    }

    const int seeds = 30;
    std::vector<double> sndr(seeds), snpdis(seeds);
    for (int s = 0; s < seeds; ++s) {
      const LoggedDataset ds = generate_logged_dataset(m, b, 200, RngStream(4100 + s, "dataset"), s);
      const FittedQ q = fit_fqe(ds, eval, FitMode::oracle, &m);
      sndr[s] = estimate_dr(ds, eval, q, true);
      snpdis[s] = estimate_pdis(ds, eval, true);
    }
    const double std_dr = population_stddev(sndr);
    const double std_pdis = population_stddev(snpdis);
    expect(problems, std_dr <= std_pdis,
           "across-seed std: SNDR " + fmt(std_dr) + " > SNPDIS " + fmt(std_pdis));
  });

  // ------------------------------------------------------------------
  harness.criterion(5, "kernel-smoothed weight matches the quadrature oracle on a 4^4 grid", [](auto& problems) {
    const double worked = smoothed_importance_weight(
        Policy::gaussian1d("g", Vector::Zero(1), Vector::Ones(1)), 0, 0.0, 0.5, 1.0);
    expect(problems, std::abs(worked - 0.56419) < 1e-4,
           "worked value " + fmt(worked) + " != 0.56419");

    const double mus[] = {-0.5, 0.0, 0.5, 1.0};
    const double sigmas[] = {0.5, 0.8, 1.2, 2.0};
    const double actions[] = {-1.0, 0.0, 0.5, 1.5};
    const double bandwidths[] = {0.5, 1.0, 1.5, 2.0};
    const double propensity = 0.4;
    int checked = 0;
    for (const double mu : mus)
      for (const double sigma : sigmas)
        for (const double a_t : actions)
          for (const double h : bandwidths) {
            const Policy g = Policy::gaussian1d("g", Vector::Constant(1, mu), Vector::Constant(1, sigma));
            const double closed = smoothed_importance_weight(g, 0, a_t, propensity, h);
            const double oracle = trapezoid_kernel_weight(mu, sigma, a_t, h, propensity);
            const double rel = std::abs(closed - oracle) / oracle;
            if (rel >= 1e-6)
              problems.push_back("grid (" + fmt(mu) + "," + fmt(sigma) + "," + fmt(a_t) + "," + fmt(h) +
                                 "): rel err " + fmt(rel));
            ++checked;
          }
    expect(problems, checked == 256, "expected 256 grid combinations");
  });

  // ------------------------------------------------------------------
  harness.criterion(6, "metric formula examples and brute-force top-k agreement", [](auto& problems) {
    // sharpe_ratio_at_k
    {
      const ValueMap truths = {{"pi1", 10.0}, {"pi3", 2.0}};
      const ValueMap estimates = {{"pi1", 5.0}, {"pi3", 1.0}};
      const SharpeResult r = sharpe_ratio_at_k(truths, estimates, 2, 4.0);
      expect(problems, std::abs(r.ratio - 1.5) <= 1e-12, "sharpe example ratio " + fmt(r.ratio) + " != 1.5");
      const ValueMap flat_truths = {{"a", 4.0}, {"b", 4.0}};
      const ValueMap any = {{"a", 1.0}, {"b", 0.5}};
      const SharpeResult zero = sharpe_ratio_at_k(flat_truths, any, 2, 4.0);
      expect(problems, zero.tag == SharpeTag::zero_over_zero && zero.ratio == 0.0, "0/0 convention violated");
    }
    // n_mse
    {
      const ValueMap truths = {{"a", 2.0}, {"b", 2.0}};
      const ValueMap estimates = {{"a", 3.0}, {"b", 1.0}};
      expect(problems, n_mse(truths, truths) == 0.0, "nMSE of perfect estimates != 0");
      expect(problems, std::abs(n_mse(truths, estimates) - 0.25) <= 1e-12, "nMSE example != 0.25");
    }
    // rank_corr
    {
      const ValueMap truths = {{"a", 4.0}, {"b", 3.0}, {"c", 2.0}, {"d", 1.0}};
      const ValueMap swapped = {{"a", 3.0}, {"b", 4.0}, {"c", 1.0}, {"d", 2.0}};
      expect(problems, std::abs(rank_corr(truths, truths) - 1.0) <= 1e-12, "rank_corr(id) != 1");
      const ValueMap reversed = {{"a", 1.0}, {"b", 2.0}, {"c", 3.0}, {"d", 4.0}};
      expect(problems, std::abs(rank_corr(truths, reversed) + 1.0) <= 1e-12, "rank_corr(rev) != -1");
      expect(problems, std::abs(rank_corr(truths, swapped) - 0.6) <= 1e-12, "rank_corr example != 0.6");
    }
    // n_regret_at_k
    {
      const ValueMap truths = {{"a", 5.0}, {"b", 3.0}};
      const ValueMap bad = {{"a", 1.0}, {"b", 9.0}};
      expect(problems, std::abs(n_regret_at_k(truths, bad, 1) - 0.4) <= 1e-12, "nRegret example != 0.4");
      expect(problems, n_regret_at_k(truths, bad, 2) == 0.0, "nRegret at k=|Pi| != 0");
      expect(problems, n_regret_at_k(truths, truths, 1) == 0.0, "nRegret of truth ranking != 0");
    }
    // select_top_k vs the brute-force subset oracle, |Pi| <= 8.
    RngStream rng(9200, "acceptance-topk");
    for (int n = 2; n <= 8; ++n) {
      for (int k = 1; k <= n; ++k) {
        for (int rep = 0; rep < 40; ++rep) {
          ValueMap estimates;
          for (int i = 0; i < n; ++i)
            estimates["p" + std::to_string(i)] = static_cast<double>(rng.uniform_below(5));
          if (select_top_k(estimates, k).ids != brute_force_top_k(estimates, k)) {
            problems.push_back("top-k mismatch at n=" + std::to_string(n) + " k=" + std::to_string(k));
            rep = 40;
          }
        }
      }
    }
  });

  // ------------------------------------------------------------------
  harness.criterion(7, "scenario 1: equal accuracy metrics, SharpeRatio@3 favors the underestimator",
                    [](auto& problems) {
    const ValueMap truths = {{"A", 10.0}, {"B", 8.0}, {"C", 7.0}, {"D", 6.0}, {"E", 3.0}, {"F", 2.0}};
    const ValueMap under = {{"A", 10.0}, {"B", 1.5}, {"C", 0.5}, {"D", 6.0}, {"E", 3.0}, {"F", 2.0}};
    const ValueMap over = {{"A", 10.0}, {"B", 8.0}, {"C", 7.0}, {"D", 6.0}, {"E", 9.5}, {"F", 8.5}};
    const double baseline = 6.0;

    expect(problems, std::abs(n_mse(truths, under) - n_mse(truths, over)) <= 1e-12,
           "nMSE differs between the two synthetic estimators");
    expect(problems, std::abs(rank_corr(truths, under) - rank_corr(truths, over)) <= 1e-12,
           "RankCorr differs between the two synthetic estimators");
    expect(problems, std::abs(n_regret_at_k(truths, under, 1) - n_regret_at_k(truths, over, 1)) <= 1e-12,
           "Regret@1 differs between the two synthetic estimators");

    const SharpeResult x = sharpe_ratio_at_k(truths, under, 3, baseline);
    const SharpeResult y = sharpe_ratio_at_k(truths, over, 3, baseline);
    expect(problems, x.ratio > y.ratio,
           "SharpeRatio@3 does not favor the underestimator (" + fmt(x.ratio) + " vs " + fmt(y.ratio) + ")");
    expect(problems, std::abs(x.numerator - y.numerator) <= 1e-12, "returns should be identical");
    expect(problems, x.denominator < y.denominator, "risk should be larger for the overestimator");
  });

  // ------------------------------------------------------------------
  harness.criterion(8, "scenario 2: baseline sweep flips the preference, unstable middle", [](auto& problems) {
    const ValueMap truths = {{"A", 16.0}, {"B", 13.0}, {"C", 12.5}, {"D", 12.0}, {"E", 11.5}, {"F", 11.0},
                             {"G", 10.0}, {"H", 8.0},  {"I", 6.0},  {"J", 4.0},  {"K", 2.0},  {"L", 1.0}};
    const ValueMap conservative = {{"A", 3.0}, {"B", 2.8}, {"C", 9.0}, {"D", 8.8}, {"E", 8.6}, {"F", 8.4},
                                   {"G", 2.6}, {"H", 2.4}, {"I", 2.2}, {"J", 2.0}, {"K", 1.8}, {"L", 1.6}};
    const int k = 4;
    const int seeds = 20;

    auto sweep = [&](double baseline) {
      std::vector<double> diffs(seeds);
      for (int s = 0; s < seeds; ++s) {
        RngStream rng(static_cast<std::uint64_t>(s), "scenario2");
        ValueMap random_like;
        for (const auto& [id, truth] : truths) {
          (void)truth;
          random_like[id] = 16.0 * rng.uniform01();  // uniform random estimates
        }
        const double w = sharpe_ratio_at_k(truths, conservative, k, baseline).ratio;
        const double z = sharpe_ratio_at_k(truths, random_like, k, baseline).ratio;
        diffs[s] = w - z;
      }
      return diffs;
    };

    const std::vector<double> low = sweep(5.0);
    const MeanStdError low_stats = mean_and_std_error(low);
    expect(problems, low_stats.mean > 0.0, "low baseline: conservative estimator should win on average");
    expect(problems, std::all_of(low.begin(), low.end(), [](double d) { return d > 0.0; }),
           "low baseline: conservative estimator should win every seed");

    const std::vector<double> high = sweep(14.0);
    const MeanStdError high_stats = mean_and_std_error(high);
    expect(problems, high_stats.mean < 0.0, "high baseline: random estimator should win on average");

    const std::vector<double> mid = sweep(12.4);
    const double mid_mean = mean_and_std_error(mid).mean;
    const double mid_std = population_stddev(mid);
    expect(problems, std::abs(mid_mean) < mid_std,
           "middle baseline: |mean diff| " + fmt(std::abs(mid_mean)) + " not below across-seed std " + fmt(mid_std));
    const bool has_positive = std::any_of(mid.begin(), mid.end(), [](double d) { return d > 0.0; });
    const bool has_negative = std::any_of(mid.begin(), mid.end(), [](double d) { return d < 0.0; });
    expect(problems, has_positive && has_negative, "middle baseline: the gap's sign should vary across seeds");
  });

  // ------------------------------------------------------------------
  harness.criterion(9, "non-negativity of SharpeRatio@|Pi| with pi_b appended", [](auto& problems) {
    ExperimentConfig config;
    config.mdp = five_state_reference();
    config.behavior = make_softmax_policy(config.mdp.reward_mean, 1.0, "pi_b");
    config.suite.reference_bases = true;
    config.suite.noise_levels = {0.1, 0.3, 0.5, 0.9};
    config.suite.subsample = 6;
    config.suite.suite_seed = 5;
    config.n_trajectories = 500;
    config.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    config.estimator.q_mode = FitMode::oracle;
    config.estimator.weight_mode = FitMode::oracle;

    const AggregateReport report = run_experiment(config);
    expect(problems, !report.partial, "experiment recorded seed failures");
    const int full_k = static_cast<int>(report.truths.size());
    for (const SeedResult& r : report.per_seed) {
      for (const auto& [estimator, metrics] : r.metrics) {
        const SharpeResult& s = metrics.sharpe.at(full_k);
        const bool ok = s.tag == SharpeTag::pos_inf ||
                        ((s.tag == SharpeTag::finite || s.tag == SharpeTag::zero_over_zero) && s.ratio >= 0.0);
        expect(problems, ok,
               "seed " + std::to_string(r.seed) + " estimator " + estimator + ": SharpeRatio@" +
                   std::to_string(full_k) + " = " + fmt(s.ratio) + " tag " + to_string(s.tag));
      }
    }
  });

  // ------------------------------------------------------------------
  harness.criterion(10, "benchmark determinism: byte-identical reports, parallel = serial", [](auto& problems) {
    const auto dir = std::filesystem::temp_directory_path() / "ope-acceptance-determinism";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    ExperimentConfig config;
    config.mdp = five_state_reference();
    config.behavior = make_softmax_policy(config.mdp.reward_mean, 1.0, "pi_b");
    config.suite.reference_bases = true;
    config.suite.noise_levels = {0.1, 0.5};
    config.suite.subsample = 4;
    config.n_trajectories = 200;
    config.seeds = {0, 1, 2};
    config.estimator.q_mode = FitMode::empirical;
    config.estimator.weight_mode = FitMode::empirical;
    config.metrics.reference_k = 3;

    Json config_json = config.to_json();
    {
      std::ofstream out(dir / "config.json");
      out << config_json.dump(2) << "\n";
    }
    config_json["parallelism"] = 4;
    {
      std::ofstream out(dir / "config_parallel.json");
      out << config_json.dump(2) << "\n";
    }

    auto run_cli = [&](const std::string& config_name, const std::string& out_name) {
      const std::string cmd = std::string("\"") + OPE_BENCH_CLI_PATH + "\" benchmark --config \"" +
                              (dir / config_name).string() + "\" --out \"" + (dir / out_name).string() +
                              "\" > /dev/null 2>&1";
      return std::system(cmd.c_str());
    };
    auto read_file = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };

    expect(problems, run_cli("config.json", "run1") == 0, "first CLI run failed");
    expect(problems, run_cli("config.json", "run2") == 0, "second CLI run failed");
    expect(problems, run_cli("config_parallel.json", "run3") == 0, "parallel CLI run failed");

    const std::string r1 = read_file(dir / "run1" / "report.json");
    const std::string r2 = read_file(dir / "run2" / "report.json");
    const std::string r3 = read_file(dir / "run3" / "report.json");
    expect(problems, !r1.empty(), "first report is empty");
    expect(problems, r1 == r2, "two identical runs produced different report bytes");
    expect(problems, r1 == r3, "parallel and serial runs produced different report bytes");

    // In-process double check of the same property.
    const AggregateReport a = run_experiment(config);
    ExperimentConfig parallel = config;
    parallel.parallelism = 4;
    const AggregateReport b = run_experiment(parallel);
    expect(problems, a.to_json().dump() == b.to_json().dump(), "in-process parallel != serial");
    std::filesystem::remove_all(dir);
  });

  // ------------------------------------------------------------------
  harness.criterion(11, "cross-metric comparison matches a brute-force recomputation", [](auto& problems) {
    const std::vector<std::string> estimators = {"e1", "e2", "e3", "e4", "e5"};
    const double sharpe[3][5] = {{2.0, 1.5, 1.0, 0.5, 0.2},
                                 {0.3, 2.2, 1.1, 0.9, 0.4},
                                 {1.0, 1.0, 3.0, 0.1, 0.6}};
    const double nmse[3][5] = {{0.1, 0.2, 0.3, 0.4, 0.5},
                               {0.5, 0.1, 0.2, 0.3, 0.4},
                               {0.2, 0.5, 0.1, 0.4, 0.3}};
    const double rankc[3][5] = {{0.9, 0.8, 0.7, 0.6, 0.5},
                                {0.5, 0.9, 0.8, 0.7, 0.6},
                                {0.1, 0.2, 0.9, 0.3, 0.4}};
    const double nregret[3][5] = {{0.0, 0.1, 0.2, 0.3, 0.4},
                                  {0.4, 0.0, 0.1, 0.2, 0.3},
                                  {0.3, 0.4, 0.0, 0.2, 0.1}};

    AggregateReport report;
    report.estimator_names = estimators;
    for (int s = 0; s < 3; ++s) {
      SeedResult r;
      r.seed = s;
      for (int e = 0; e < 5; ++e) {
        SeedMetrics m;
        SharpeResult sr;
        sr.ratio = sharpe[s][e];
        sr.tag = SharpeTag::finite;
        m.sharpe[5] = sr;
        m.nmse = MetricValue::ok(nmse[s][e]);
        m.rankcorr = MetricValue::ok(rankc[s][e]);
        m.nregret[1] = MetricValue::ok(nregret[s][e]);
        r.metrics[estimators[e]] = m;
      }
      report.per_seed.push_back(std::move(r));
    }
    const auto cross = cross_metric_comparison(report, "sharpe_ratio", 5);

    for (const std::string& metric : {std::string("n_mse"), std::string("rank_corr"), std::string("n_regret")}) {
      std::vector<double> rhos;
      int disagreements = 0;
      for (int s = 0; s < 3; ++s) {
        std::vector<double> ref_scores, metric_scores;
        for (int e = 0; e < 5; ++e) {
          ref_scores.push_back(sharpe[s][e]);
          if (metric == "n_mse") metric_scores.push_back(-nmse[s][e]);
          if (metric == "rank_corr") metric_scores.push_back(rankc[s][e]);
          if (metric == "n_regret") metric_scores.push_back(-nregret[s][e]);
        }
        rhos.push_back(reference_spearman(ref_scores, metric_scores));
        const auto best_ref = std::max_element(ref_scores.begin(), ref_scores.end()) - ref_scores.begin();
        const auto best_metric =
            std::max_element(metric_scores.begin(), metric_scores.end()) - metric_scores.begin();
        if (best_ref != best_metric) ++disagreements;
      }
      double mean = (rhos[0] + rhos[1] + rhos[2]) / 3.0;
      double var = 0.0;
      for (const double r : rhos) var += (r - mean) * (r - mean);
      const double sample_std = std::sqrt(var / 2.0);

      const CrossMetricEntry& entry = cross.at(metric);
      expect(problems, std::abs(entry.spearman_mean - mean) <= 1e-12, metric + ": spearman mean mismatch");
      expect(problems, std::abs(entry.spearman_std - sample_std) <= 1e-12, metric + ": spearman std mismatch");
      expect(problems, entry.disagreements == disagreements, metric + ": disagreement count mismatch");
      expect(problems, entry.excluded == 0 && entry.n_seeds == 3, metric + ": seed accounting mismatch");
    }
  });

  std::printf("%s: %d criterion(s) failed\n", harness.failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              harness.failures);
  return harness.failures == 0 ? 0 : 1;
}
