#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace tslam {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;      // human-readable measured-vs-limit summary
  nlohmann::json metrics;  // measured values with their thresholds
};

/// Suites: "oracle" runs the fast numeric checks (1-4, 10), "sim" the two
/// simulator-backed checks (5, 6), "full" everything including the long
/// accuracy and timing trials (7-9).
bool is_acceptance_suite(const std::string& suite);

/// Runs the suite, streaming one verdict line per criterion to `progress`.
/// Throws ConfigError for an unknown suite name.
std::vector<CriterionResult> run_acceptance(const std::string& suite,
                                            std::ostream& progress);

bool all_passed(const std::vector<CriterionResult>& results);

nlohmann::json acceptance_to_json(const std::vector<CriterionResult>& results);

}  // namespace tslam
