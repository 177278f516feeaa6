#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ope/mdp.hpp"
#include "ope/policy.hpp"
#include "ope/rng.hpp"
#include "ope/trajectory.hpp"

namespace ope {

enum class ActionSpace { discrete, continuous };

/// Trajectory plus the exact behavior propensity pi_b(a_t | s_t) recorded at
/// generation time for every step, so estimators never need the behavior
/// policy object.
struct LoggedTrajectory {
  Trajectory trajectory;
  std::vector<double> behavior_probs;
};

/// Seeded collection of trajectories generated under one behavior policy.
struct LoggedDataset {
  std::string mdp_id;
  std::string behavior_policy_id;
  long seed = 0;
  int horizon = 0;
  double discount = 1.0;
  int num_states = 0;
  int num_actions = 0;  // 0 for continuous action spaces
  ActionSpace action_space = ActionSpace::discrete;
  std::vector<LoggedTrajectory> trajectories;

  int n() const { return static_cast<int>(trajectories.size()); }
  std::string dataset_id() const {
    return mdp_id + "/" + behavior_policy_id + "/n" + std::to_string(n()) + "/seed" + std::to_string(seed);
  }

  /// Positive propensities, n >= 1, uniform trajectory length.
  void validate() const;
};

/// Generates n seeded trajectories with recorded propensities. Trajectories
/// use per-index child streams of `rng`, so the result is independent of
/// `n_threads` and of scheduling.
LoggedDataset generate_logged_dataset(const TabularMdp& mdp, const Policy& behavior, int n,
                                      const RngStream& rng, long seed_label, int n_threads = 1);
LoggedDataset generate_logged_dataset(const ContinuousActionMdp& mdp, const Policy& behavior, int n,
                                      const RngStream& rng, long seed_label, int n_threads = 1);

/// Line-delimited JSON: one header line (schema version, ids, n, T, gamma,
/// checksum of the record lines), then one trajectory record per line.
/// save/load round-trips bit-exactly, including propensities.
void save_dataset(const LoggedDataset& ds, const std::filesystem::path& path);
LoggedDataset load_dataset(const std::filesystem::path& path);

/// (1/n) sum_i sum_t gamma^t r_t with pairwise across-trajectory summation.
double average_discounted_return(const LoggedDataset& ds);

}  // namespace ope
