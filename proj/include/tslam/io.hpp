#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslam/pipeline.hpp"
#include "tslam/simulator.hpp"

namespace tslam {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

/// rect1: 90 mm square; hex: regular hexagon, 60.5 mm circumradius;
/// ellip2: 130.9 x 90 mm ellipse.
GroundTruthShape shape_preset(const std::string& name);
bool is_shape_preset(const std::string& name);

struct AppConfig {
  TrialConfig trial;
  SlamConfig slam;
};

/// Strict parse: unknown keys raise ConfigError naming the key. All keys are
/// optional and default to the built-in values; units are spelled out in the
/// key names.
AppConfig parse_config(const nlohmann::json& j);
AppConfig load_config(const std::string& path);

/// Canonical JSON image of the full effective config (every field present,
/// keys sorted); the digest is FNV-1a 64 over its serialization.
nlohmann::json config_to_json(const AppConfig& config);
std::uint64_t fnv1a64(const std::string& bytes);
std::string config_digest(const AppConfig& config);

void write_trial_log(const TrialLog& log, std::ostream& out);
void write_trial_log_file(const TrialLog& log, const std::string& path);
TrialLog read_trial_log(std::istream& in);
TrialLog read_trial_log_file(const std::string& path);

void write_estimates(const RunResult& run, std::ostream& out);
nlohmann::json report_to_json(const EvalReport& report);
void write_report_csv(const EvalReport& report, std::ostream& out);

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string version = "0.1.0";
};

nlohmann::json manifest_to_json(const RunManifest& manifest);

}  // namespace tslam
