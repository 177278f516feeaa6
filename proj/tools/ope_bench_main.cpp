// ope-bench: generate logged datasets, run OPE estimators, and benchmark them
// with SharpeRatio@k and conventional accuracy metrics.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ope/bench.hpp"
#include "ope/dataset.hpp"
#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;     // usage / config errors
constexpr int kExitEstimator = 2; // runtime estimator failure (partial report written)

ope::Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ope::ParseError("cannot open '" + path.string() + "'");
  try {
    return ope::Json::parse(in);
  } catch (const ope::Json::exception& e) {
    throw ope::ParseError("'" + path.string() + "': " + e.what());
  }
}

int run_generate(const std::string& mdp_path, const std::string& policy_path, int n, long seed,
                 const std::string& out_path) {
  const ope::Json mdp_json = load_json(mdp_path);
  const ope::Policy policy = ope::Policy::from_json(load_json(policy_path));
  const ope::RngStream stream(static_cast<std::uint64_t>(seed), "dataset");

  ope::LoggedDataset ds;
  if (mdp_json.contains("action_bins")) {
    const auto mdp = ope::ContinuousActionMdp::from_json(mdp_json);
    ds = ope::generate_logged_dataset(mdp, policy, n, stream, seed);
  } else {
    const auto mdp = ope::TabularMdp::from_json(mdp_json);
    ds = ope::generate_logged_dataset(mdp, policy, n, stream, seed);
  }
  ope::save_dataset(ds, out_path);
  std::cout << "wrote " << ds.n() << " trajectories to " << out_path << "\n";
  return kExitOk;
}

int run_evaluate(const std::string& dataset_path, const std::string& policies_path,
                 const std::string& config_path, const std::string& out_path) {
  const ope::LoggedDataset ds = ope::load_dataset(dataset_path);

  std::vector<ope::Policy> candidates;
  const ope::Json policies_json = load_json(policies_path);
  if (!policies_json.is_array()) throw ope::ParseError("policies file must hold a JSON array of policies");
  for (const auto& pj : policies_json) candidates.push_back(ope::Policy::from_json(pj));

  ope::EstimatorConfig config;
  ope::TabularMdp oracle_mdp;
  ope::Policy behavior = ope::Policy::tabular("unused", ope::Matrix::Constant(1, 1, 1.0));
  bool have_mdp = false, have_behavior = false;
  if (!config_path.empty()) {
    const ope::Json cj = load_json(config_path);
    const ope::Json ej = cj.contains("estimator") ? cj.at("estimator") : cj;
    config.q_mode = ej.value("q_mode", "empirical") == "oracle" ? ope::FitMode::oracle : ope::FitMode::empirical;
    config.weight_mode =
        ej.value("weight_mode", "empirical") == "oracle" ? ope::FitMode::oracle : ope::FitMode::empirical;
    config.time_mode =
        ej.value("time_mode", "averaged") == "per_step" ? ope::TimeMode::per_step : ope::TimeMode::averaged;
    config.self_normalize = ej.value("self_normalize", true);
    config.bandwidth = ej.value("bandwidth", 0.3);
    config.mdr_bootstrap = ej.value("mdr_bootstrap", "next_state") == "next_state" ? ope::MdrBootstrap::next_state
                                                                                : ope::MdrBootstrap::current_state;
    const auto base_dir = std::filesystem::path(config_path).parent_path();
    if (cj.contains("mdp")) {
      ope::Json mdp_json = cj.at("mdp");
      if (mdp_json.is_object() && mdp_json.contains("file"))
        mdp_json = load_json(base_dir / mdp_json.at("file").get<std::string>());
      oracle_mdp = ope::TabularMdp::from_json(mdp_json);
      have_mdp = true;
    }
    if (cj.contains("behavior_policy")) {
      ope::Json pj = cj.at("behavior_policy");
      if (pj.is_object() && pj.contains("file"))
        pj = load_json(base_dir / pj.at("file").get<std::string>());
      behavior = ope::Policy::from_json(pj);
      have_behavior = true;
    }
  }
  if (have_mdp) config.mdp = &oracle_mdp;
  if (have_behavior) config.behavior = &behavior;

  const ope::EstimateTable table = ope::run_all_estimators(ds, candidates, config);
  if (out_path.empty()) {
    std::cout << table.to_csv();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ope::ParseError("cannot open '" + out_path + "' for writing");
    out << table.to_csv();
    std::cout << "wrote estimate table to " << out_path << "\n";
  }
  return kExitOk;
}

int run_benchmark(const std::string& config_path, const std::string& out_dir) {
  const auto base_dir = std::filesystem::path(config_path).parent_path();
  const ope::ExperimentConfig config = ope::ExperimentConfig::from_json(load_json(config_path), base_dir);
  const ope::AggregateReport report = ope::run_experiment(config);

  std::filesystem::create_directories(out_dir);
  const auto json_path = std::filesystem::path(out_dir) / "report.json";
  const auto csv_path = std::filesystem::path(out_dir) / "report.csv";
  ope::emit_report(report, ope::ReportFormat::json, json_path);
  ope::emit_report(report, ope::ReportFormat::csv, csv_path);
  std::cout << "wrote " << json_path.string() << " and " << csv_path.string() << "\n";
  if (report.partial) {
    std::cerr << "warning: some seeds recorded estimator failures; report marks partial coverage\n";
    return kExitEstimator;
  }
  return kExitOk;
}

int run_report(const std::string& in_dir, const std::string& format, const std::string& out_path) {
  const auto json_path = std::filesystem::path(in_dir) / "report.json";
  const ope::Json report = load_json(json_path);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw ope::ParseError("cannot open '" + out_path + "' for writing");
    out = &file;
  }
  if (format == "json") {
    *out << report.dump(2) << '\n';
  } else if (format == "csv") {
    const auto csv_path = std::filesystem::path(in_dir) / "report.csv";
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw ope::ParseError("cannot open '" + csv_path.string() + "'");
    *out << csv.rdbuf();
  } else {
    throw ope::ParameterError("unknown report format '" + format + "' (expected json or csv)");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation workbench with SharpeRatio@k"};
  app.set_version_flag("--version", std::string("ope-bench ") + ope::kVersion);
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Generate a logged dataset under a behavior policy");
  std::string mdp_path, policy_path, out_path;
  int n = 0;
  long seed = 0;
  generate->add_option("--mdp", mdp_path, "MDP JSON file")->required();
  generate->add_option("--policy", policy_path, "behavior policy JSON file")->required();
  generate->add_option("--n", n, "number of trajectories")->required();
  generate->add_option("--seed", seed, "dataset seed")->required();
  generate->add_option("--out", out_path, "output dataset path")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run all estimators on a dataset");
  std::string dataset_path, policies_path, eval_config_path, eval_out;
  evaluate->add_option("--dataset", dataset_path, "dataset file")->required();
  evaluate->add_option("--policies", policies_path, "JSON array of candidate policies")->required();
  evaluate->add_option("--config", eval_config_path, "estimator config JSON (optional mdp/behavior for oracle fits)");
  evaluate->add_option("--out", eval_out, "write the CSV table here instead of stdout");

  auto* benchmark = app.add_subcommand("benchmark", "Run a multi-seed experiment from a config file");
  std::string bench_config, bench_out;
  benchmark->add_option("--config", bench_config, "experiment config JSON")->required();
  benchmark->add_option("--out", bench_out, "output directory")->required();

  auto* report = app.add_subcommand("report", "Re-emit a benchmark report as json or csv");
  std::string report_in, report_format = "json", report_out;
  report->add_option("--in", report_in, "benchmark output directory")->required();
  report->add_option("--format", report_format, "json or csv")->required();
  report->add_option("--out", report_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
    if (*generate) return run_generate(mdp_path, policy_path, n, seed, out_path);
    if (*evaluate) return run_evaluate(dataset_path, policies_path, eval_config_path, eval_out);
    if (*benchmark) return run_benchmark(bench_config, bench_out);
    if (*report) return run_report(report_in, report_format, report_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const ope::EstimatorError& e) {
    std::cerr << "estimator error: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const ope::DegenerateNormalizationError& e) {
    std::cerr << "estimator error: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const ope::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
