#include "ope/dataset.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ope/errors.hpp"
#include "ope/hash.hpp"
#include "ope/numeric.hpp"

namespace ope {

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kFormatName = "ope-bench-dataset";

template <typename MdpType>
LoggedDataset generate_impl(const MdpType& mdp, const Policy& behavior, int n, const RngStream& rng,
                            long seed_label, int n_threads, ActionSpace action_space, int num_actions) {
  if (n < 1) throw ParameterError("generate_logged_dataset: n must be >= 1");

  // Full support is required by importance-weighted estimators for candidates
  // that can reach the uncovered pairs; checked and warned, not enforced.
  if constexpr (std::is_same_v<MdpType, TabularMdp>) {
    if ((behavior.probs().array() == 0.0).any())
      std::cerr << "warning: behavior policy '" << behavior.id()
                << "' assigns zero probability to some (state, action) pairs; importance-weighted "
                   "estimates for candidates reaching them will be degenerate\n";
  }

  LoggedDataset ds;
  ds.mdp_id = mdp.id;
  ds.behavior_policy_id = behavior.id();
  ds.seed = seed_label;
  ds.horizon = mdp.horizon;
  ds.discount = mdp.discount;
  ds.num_states = mdp.num_states;
  ds.num_actions = num_actions;
  ds.action_space = action_space;
  ds.trajectories.resize(n);

  auto fill_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      LoggedTrajectory& item = ds.trajectories[i];
      item.trajectory = sample_trajectory(mdp, behavior, rng.derive(static_cast<std::uint64_t>(i)));
      item.behavior_probs.reserve(item.trajectory.steps.size());
      for (const Step& step : item.trajectory.steps) {
        if constexpr (std::is_same_v<MdpType, TabularMdp>) {
          item.behavior_probs.push_back(behavior.prob(step.state, static_cast<int>(step.action)));
        } else {
          item.behavior_probs.push_back(behavior.density(step.state, step.action));
        }
      }
    }
  };

  if (n_threads <= 1 || n < 2) {
    fill_range(0, n);
  } else {
    const int workers = std::min(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(fill_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  ds.validate();
  return ds;
}

Json trajectory_record(const LoggedTrajectory& item) {
  Json steps = Json::array();
  for (const Step& s : item.trajectory.steps)
    steps.push_back(Json::array({s.state, s.action, s.reward, s.next_state}));
  Json j;
  j["steps"] = std::move(steps);
  j["probs"] = item.behavior_probs;
  j["seed_tag"] = item.trajectory.seed_tag;
  return j;
}

LoggedTrajectory trajectory_from_record(const Json& j, int record_index) {
  const std::string ctx = "dataset record " + std::to_string(record_index);
  LoggedTrajectory item;
  const Json& steps = require_field(j, "steps", ctx);
  if (!steps.is_array()) throw ParseError(ctx + ": 'steps' must be an array");
  for (const auto& sj : steps) {
    if (!sj.is_array() || sj.size() != 4) throw ParseError(ctx + ": malformed step tuple");
    Step step;
    step.state = sj[0].get<int>();
    step.action = sj[1].get<double>();
    step.reward = sj[2].get<double>();
    step.next_state = sj[3].get<int>();
    item.trajectory.steps.push_back(step);
  }
  const Json& probs = require_field(j, "probs", ctx);
  if (!probs.is_array() || probs.size() != steps.size())
    throw ParseError(ctx + ": 'probs' must match the number of steps");
  for (const auto& p : probs) item.behavior_probs.push_back(p.get<double>());
  item.trajectory.seed_tag = j.value("seed_tag", "");
  return item;
}

}  // namespace

void LoggedDataset::validate() const {
  if (trajectories.empty()) throw ParameterError("dataset: must contain at least one trajectory");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const LoggedTrajectory& item = trajectories[i];
    if (static_cast<int>(item.trajectory.steps.size()) != horizon)
      throw ShapeError("dataset: trajectory " + std::to_string(i) + " does not have length T");
    if (item.behavior_probs.size() != item.trajectory.steps.size())
      throw ShapeError("dataset: trajectory " + std::to_string(i) + " propensity count mismatch");
    for (std::size_t t = 0; t + 1 < item.trajectory.steps.size(); ++t)
      if (item.trajectory.steps[t].next_state != item.trajectory.steps[t + 1].state)
        throw ShapeError("dataset: trajectory " + std::to_string(i) + " breaks the state chain at step " + std::to_string(t));
    for (const double p : item.behavior_probs)
      if (!(p > 0.0))
        throw ParameterError("dataset: trajectory " + std::to_string(i) + " logged a nonpositive propensity");
  }
}

LoggedDataset generate_logged_dataset(const TabularMdp& mdp, const Policy& behavior, int n,
                                      const RngStream& rng, long seed_label, int n_threads) {
  return generate_impl(mdp, behavior, n, rng, seed_label, n_threads, ActionSpace::discrete, mdp.num_actions);
}

LoggedDataset generate_logged_dataset(const ContinuousActionMdp& mdp, const Policy& behavior, int n,
                                      const RngStream& rng, long seed_label, int n_threads) {
  return generate_impl(mdp, behavior, n, rng, seed_label, n_threads, ActionSpace::continuous, 0);
}

void save_dataset(const LoggedDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::string body;
  for (const LoggedTrajectory& item : ds.trajectories) {
    body += trajectory_record(item).dump();
    body += '\n';
  }

  Json header;
  header["format"] = kFormatName;
  header["version"] = kSchemaVersion;
  header["mdp_id"] = ds.mdp_id;
  header["behavior_policy_id"] = ds.behavior_policy_id;
  header["seed"] = ds.seed;
  header["n"] = ds.n();
  header["horizon"] = ds.horizon;
  header["discount"] = ds.discount;
  header["num_states"] = ds.num_states;
  header["num_actions"] = ds.num_actions;
  header["action_space"] = ds.action_space == ActionSpace::discrete ? "discrete" : "continuous";
  header["checksum"] = sha256_hex(body);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("save_dataset: cannot open '" + path.string() + "' for writing");
  out << header.dump() << '\n' << body;
  if (!out) throw ParseError("save_dataset: write to '" + path.string() + "' failed");
}

LoggedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_dataset: cannot open '" + path.string() + "'");

  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError("load_dataset: '" + path.string() + "' is empty");
  Json header;
  try {
    header = Json::parse(header_line);
  } catch (const Json::exception& e) {
    throw ParseError("load_dataset: malformed header line: " + std::string(e.what()));
  }
  if (header.value("format", "") != kFormatName)
    throw ParseError("load_dataset: '" + path.string() + "' is not an " + std::string(kFormatName) + " file");
  const int version = header.value("version", -1);
  if (version != kSchemaVersion)
    throw VersionError("load_dataset: schema version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kSchemaVersion) + ")");

  LoggedDataset ds;
  const std::string ctx = "dataset header";
  ds.mdp_id = require_field(header, "mdp_id", ctx).get<std::string>();
  ds.behavior_policy_id = require_field(header, "behavior_policy_id", ctx).get<std::string>();
  ds.seed = require_field(header, "seed", ctx).get<long>();
  ds.horizon = require_field(header, "horizon", ctx).get<int>();
  ds.discount = require_field(header, "discount", ctx).get<double>();
  ds.num_states = require_field(header, "num_states", ctx).get<int>();
  ds.num_actions = require_field(header, "num_actions", ctx).get<int>();
  ds.action_space = require_field(header, "action_space", ctx).get<std::string>() == "continuous"
                        ? ActionSpace::continuous
                        : ActionSpace::discrete;
  const int expected_n = require_field(header, "n", ctx).get<int>();
  const std::string expected_checksum = require_field(header, "checksum", ctx).get<std::string>();

  std::string body;
  std::string line;
  int record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    body += line;
    body += '\n';
    Json record_json;
    try {
      record_json = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError("load_dataset: record " + std::to_string(record) + " is malformed: " + std::string(e.what()));
    }
    ds.trajectories.push_back(trajectory_from_record(record_json, record));
    ++record;
  }
  if (record != expected_n)
    throw ParseError("load_dataset: '" + path.string() + "' is truncated: header promises " +
                     std::to_string(expected_n) + " records, found " + std::to_string(record));
  if (sha256_hex(body) != expected_checksum)
    throw ParseError("load_dataset: checksum mismatch in '" + path.string() + "'");

  ds.validate();
  return ds;
}

double average_discounted_return(const LoggedDataset& ds) {
  std::vector<double> returns(ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
    returns[i] = discounted_return(ds.trajectories[i].trajectory, ds.discount);
  return pairwise_sum(returns) / static_cast<double>(returns.size());
}

}  // namespace ope
