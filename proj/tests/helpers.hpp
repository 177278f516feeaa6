// Shared fixtures and independent test oracles. Everything here is test-only
// and deliberately avoids the library's own DP code paths where it acts as an
// oracle (brute-force enumeration, hand-rolled Spearman, subset scans).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ope/mdp.hpp"
#include "ope/policy.hpp"
#include "ope/rng.hpp"

namespace ope::test {

inline TabularMdp single_state_mdp(double reward, int horizon, double discount, double noise = 0.0) {
  TabularMdp m;
  m.id = "single";
  m.num_states = 1;
  m.num_actions = 1;
  m.horizon = horizon;
  m.discount = discount;
  m.initial_dist = Vector::Constant(1, 1.0);
  m.transition = {Matrix::Constant(1, 1, 1.0)};
  m.reward_mean = Matrix::Constant(1, 1, reward);
  m.reward_noise_std = Matrix::Constant(1, 1, noise);
  m.validate();
  return m;
}

/// s0 -> s1 deterministically under both actions; R(s0,.) = 0, R(s1,.) = 2,
/// T = 2, gamma = 0.9, so J = 0 + 0.9 * 2 = 1.8 for every policy.
inline TabularMdp two_state_chain() {
  TabularMdp m;
  m.id = "chain2";
  m.num_states = 2;
  m.num_actions = 2;
  m.horizon = 2;
  m.discount = 0.9;
  m.initial_dist = Vector::Zero(2);
  m.initial_dist(0) = 1.0;
  Matrix step(2, 2);
  step << 0, 1,  // s0 -> s1
      0, 1;      // s1 self-loops
  m.transition = {step, step};
  m.reward_mean = Matrix::Zero(2, 2);
  m.reward_mean.row(1).setConstant(2.0);
  m.reward_noise_std = Matrix::Zero(2, 2);
  m.validate();
  return m;
}

/// Reference 3-state / 2-action / T = 5 MDP with stochastic transitions and
/// full-support dynamics; reward noise keeps Monte-Carlo checks honest.
inline TabularMdp three_state_reference(double reward_noise = 0.5) {
  TabularMdp m;
  m.id = "ref3";
  m.num_states = 3;
  m.num_actions = 2;
  m.horizon = 5;
  m.discount = 0.95;
  m.initial_dist = Vector(3);
  m.initial_dist << 0.6, 0.3, 0.1;
  Matrix t0(3, 3), t1(3, 3);
  t0 << 0.7, 0.2, 0.1,
        0.1, 0.6, 0.3,
        0.2, 0.3, 0.5;
  t1 << 0.2, 0.5, 0.3,
        0.3, 0.2, 0.5,
        0.5, 0.4, 0.1;
  m.transition = {t0, t1};
  m.reward_mean = Matrix(3, 2);
  m.reward_mean << 0.1, 0.7,
                   0.4, -0.2,
                   1.0, 0.3;
  m.reward_noise_std = Matrix::Constant(3, 2, reward_noise);
  m.validate();
  return m;
}

/// 5-state / 2-action / T = 6 reference MDP for bench-level experiments.
inline TabularMdp five_state_reference() {
  TabularMdp m;
  m.id = "ref5";
  m.num_states = 5;
  m.num_actions = 2;
  m.horizon = 6;
  m.discount = 1.0;
  m.initial_dist = Vector::Zero(5);
  m.initial_dist(0) = 1.0;
  Matrix t0 = Matrix::Zero(5, 5), t1 = Matrix::Zero(5, 5);
  for (int s = 0; s < 5; ++s) {
    // action 0 drifts right, action 1 drifts left, both with slippage
    const int right = std::min(s + 1, 4);
    const int left = std::max(s - 1, 0);
    t0(s, right) += 0.8;
    t0(s, s) += 0.15;
    t0(s, left) += 0.05;
    t1(s, left) += 0.8;
    t1(s, s) += 0.15;
    t1(s, right) += 0.05;
  }
  m.transition = {t0, t1};
  m.reward_mean = Matrix(5, 2);
  m.reward_mean << 0.0, 0.1,
                   0.2, 0.0,
                   0.5, 0.1,
                   0.8, 0.2,
                   1.5, 0.4;
  m.reward_noise_std = Matrix::Constant(5, 2, 0.3);
  m.validate();
  return m;
}

inline Matrix random_stochastic_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int c = 0; c < cols; ++c) {
      m(r, c) = 0.05 + rng.uniform01();  // bounded away from zero: full support
      total += m(r, c);
    }
    m.row(r) /= total;
  }
  return m;
}

inline TabularMdp random_mdp(int num_states, int num_actions, int horizon, RngStream& rng,
                             double reward_noise = 0.0, double discount = 1.0) {
  TabularMdp m;
  m.id = "random";
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.horizon = horizon;
  m.discount = discount;
  m.initial_dist = random_stochastic_matrix(1, num_states, rng).row(0).transpose();
  for (int a = 0; a < num_actions; ++a) m.transition.push_back(random_stochastic_matrix(num_states, num_states, rng));
  m.reward_mean = Matrix(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) m.reward_mean(s, a) = 2.0 * rng.uniform01() - 0.5;
  m.reward_noise_std = Matrix::Constant(num_states, num_actions, reward_noise);
  m.validate();
  return m;
}

inline Policy random_policy(int num_states, int num_actions, RngStream& rng, std::string id = "random-policy") {
  return Policy::tabular(std::move(id), random_stochastic_matrix(num_states, num_actions, rng));
}

/// Exhaustive policy-value oracle: enumerates every (s0, a0, ..., a_{T-1}, sT)
/// path with its probability. Only viable for tiny MDPs; independent of the
/// library's backward-induction path.
inline double brute_force_policy_value(const TabularMdp& mdp, const Policy& policy) {
  double value = 0.0;
  struct Frame {
    int state;
    double prob;
    double reward_acc;
    int t;
  };
  std::vector<Frame> stack;
  for (int s0 = 0; s0 < mdp.num_states; ++s0)
    if (mdp.initial_dist(s0) > 0.0) stack.push_back({s0, mdp.initial_dist(s0), 0.0, 0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.t == mdp.horizon) {
      value += f.prob * f.reward_acc;
      continue;
    }
    const double scale = std::pow(mdp.discount, f.t);
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double pa = policy.prob(f.state, a);
      if (pa == 0.0) continue;
      const double reward = f.reward_acc + scale * mdp.reward_mean(f.state, a);
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        const double pt = mdp.transition[a](f.state, s2);
        if (pt == 0.0) continue;
        stack.push_back({s2, f.prob * pa * pt, reward, f.t + 1});
      }
    }
  }
  return value;
}

/// Independent Spearman with average ranks, straight from the definition.
inline double reference_spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double below = 0.0, equal = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++below;
        if (v[j] == v[i]) ++equal;
      }
      r[i] = below + 0.5 * (equal + 1);
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

/// Brute-force top-k oracle: scans all C(|Pi|, k) subsets and returns the one
/// maximizing the summed estimate-rank score under the (estimate desc, id
/// asc) tie rule.
inline std::vector<std::string> brute_force_top_k(const std::map<std::string, double>& estimates, int k) {
  std::vector<std::pair<std::string, double>> items(estimates.begin(), estimates.end());
  const int n = static_cast<int>(items.size());
  // Rank score: position in the tie-broken total order, higher = better.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (items[a].second != items[b].second) return items[a].second > items[b].second;
    return items[a].first < items[b].first;
  });
  std::vector<int> score(n);
  for (int pos = 0; pos < n; ++pos) score[order[pos]] = n - pos;

  std::vector<int> best_subset;
  long best_score = -1;
  std::vector<int> idx(k);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      long total = 0;
      for (int i : idx) total += score[i];
      if (total > best_score) {
        best_score = total;
        best_subset = idx;
      }
      return;
    }
    for (int i = start; i < n; ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);

  std::sort(best_subset.begin(), best_subset.end(), [&](int a, int b) { return score[a] > score[b]; });
  std::vector<std::string> ids;
  for (int i : best_subset) ids.push_back(items[i].first);
  return ids;
}

}  // namespace ope::test
