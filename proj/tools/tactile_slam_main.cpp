#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tslam/acceptance.hpp"
#include "tslam/io.hpp"
#include "tslam/pipeline.hpp"
#include "tslam/simulator.hpp"

namespace {

using namespace tslam;

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> shape;
  std::optional<int> reloc;
  int trials = 1;
};

AppConfig effective_config(const Options& opts) {
  AppConfig config =
      opts.config_path.empty() ? AppConfig{} : load_config(opts.config_path);
  if (opts.seed) config.trial.seed = *opts.seed;
  if (opts.shape) {
    config.trial.shape = shape_preset(*opts.shape);
    config.trial.shape_name = *opts.shape;
  }
  if (opts.reloc) config.trial.reloc_count = *opts.reloc;
  return config;
}

/// trial.jsonl -> trial-003.jsonl when several trials share one --out stem.
std::string indexed_path(const std::string& base, int index, int total) {
  if (total <= 1) return base;
  std::ostringstream suffix;
  suffix << "-" << std::setw(3) << std::setfill('0') << index;
  const std::size_t slash = base.find_last_of('/');
  const std::size_t dot = base.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + suffix.str();
  return base.substr(0, dot) + suffix.str() + base.substr(dot);
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing", 0);
  out << j.dump(2) << "\n";
}

void write_manifest(RunManifest manifest, const std::string& path) {
  write_json_file(manifest_to_json(manifest), path);
}

int cmd_simulate(const Options& opts) {
  const AppConfig config = effective_config(opts);
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config_digest = config_digest(config);
  manifest.seed = config.trial.seed;

  for (int k = 0; k < opts.trials; ++k) {
    TrialConfig trial = config.trial;
    trial.seed = config.trial.seed + static_cast<std::uint64_t>(k);
    const TrialLog log = run_trial(trial);
    const std::string path = indexed_path(opts.out, k, opts.trials);
    write_trial_log_file(log, path);
    manifest.artifacts.push_back(path);

    int contacts = 0;
    for (const TrialStep& s : log.steps) contacts += s.z.contact ? 1 : 0;
    std::cout << path << ": steps " << log.steps.size() << ", contact fraction "
              << std::fixed << std::setprecision(3)
              << static_cast<double>(contacts) / log.steps.size()
              << ", true C " << std::setprecision(5) << log.true_c_ratio
              << " m\n";
  }
  write_manifest(manifest, opts.out + ".manifest.json");
  return 0;
}

int cmd_slam(const std::string& log_path, const Options& opts, bool estimates) {
  const AppConfig config = effective_config(opts);
  const TrialLog log = read_trial_log_file(log_path);
  const RunResult run = run_slam(log, config.slam);

  RunManifest manifest;
  manifest.command = estimates ? "slam" : "eval";
  manifest.config_digest = config_digest(config);
  manifest.seed = log.config.seed;

  if (estimates) {
    const std::string est_path = opts.out + ".estimates.jsonl";
    std::ofstream est(est_path);
    if (!est) throw DataError("cannot open '" + est_path + "' for writing", 0);
    write_estimates(run, est);
    manifest.artifacts.push_back(est_path);
  } else {
    const std::string csv_path = opts.out + ".report.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot open '" + csv_path + "' for writing", 0);
    write_report_csv(run.report, csv);
    manifest.artifacts.push_back(csv_path);
  }
  const std::string report_path = opts.out + ".report.json";
  write_json_file(report_to_json(run.report), report_path);
  manifest.artifacts.push_back(report_path);
  write_manifest(manifest, opts.out + ".manifest.json");

  std::cout << log_path << ": " << log.steps.size() << " steps, trans rmse "
            << std::fixed << std::setprecision(2)
            << run.report.trans_rmse * 1e3 << " mm, rot rmse "
            << std::setprecision(4) << run.report.rot_rmse
            << " rad, final mhd " << std::setprecision(2)
            << run.report.final_mhd * 1e3 << " mm\n";
  return 0;
}

int cmd_accept(const std::string& suite, const std::string& out) {
  const std::vector<CriterionResult> results = run_acceptance(suite, std::cout);
  if (!out.empty()) write_json_file(acceptance_to_json(results), out);
  if (all_passed(results)) {
    std::cout << "suite '" << suite << "': all criteria passed\n";
    return 0;
  }
  std::cout << "suite '" << suite << "': FAILED\n";
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar tactile SLAM: pushing-trial simulation, pose/shape "
               "estimation over recorded logs, evaluation, acceptance checks"};
  app.require_subcommand(1);

  Options opts;
  std::string log_path;
  std::string suite = "full";

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a pushing trial log");
  simulate->add_option("--config", opts.config_path, "JSON config path");
  simulate->add_option("--out", opts.out, "output log path")->required();
  simulate->add_option("--seed", opts.seed, "override trial seed");
  simulate->add_option("--trials", opts.trials, "number of logs (seed+k each)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--shape", opts.shape,
                       "shape preset: rect1, hex, or ellip2");
  simulate->add_option("--reloc", opts.reloc, "relocalization event count");

  CLI::App* slam = app.add_subcommand(
      "slam", "run the estimator over a log; write estimates and report");
  slam->add_option("log", log_path, "trial log (JSON lines)")->required();
  slam->add_option("--config", opts.config_path, "JSON config path");
  slam->add_option("--out", opts.out, "output path stem")->required();

  CLI::App* eval = app.add_subcommand(
      "eval", "run the estimator over a log; write report JSON and CSV");
  eval->add_option("log", log_path, "trial log (JSON lines)")->required();
  eval->add_option("--config", opts.config_path, "JSON config path");
  eval->add_option("--out", opts.out, "output path stem")->required();

  CLI::App* accept = app.add_subcommand(
      "accept", "run an acceptance suite: oracle, sim, or full");
  accept->add_option("suite", suite, "suite name")->capture_default_str();
  accept->add_option("--out", opts.out, "verdict JSON path");

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return cmd_simulate(opts);
    if (slam->parsed()) return cmd_slam(log_path, opts, true);
    if (eval->parsed()) return cmd_slam(log_path, opts, false);
    if (accept->parsed()) return cmd_accept(suite, opts.out);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const tslam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tslam::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
