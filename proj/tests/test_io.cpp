#include <doctest.h>

#include <sstream>

#include "tslam/io.hpp"

using namespace tslam;
using nlohmann::json;

namespace {

TrialLog sample_log() {
  TrialConfig config;
  config.steps = 12;
  config.seed = 7;
  config.reloc_count = 2;
  return run_trial(config);
}

std::string dump_log(const TrialLog& log) {
  std::ostringstream out;
  write_trial_log(log, out);
  return out.str();
}

}  // namespace

TEST_CASE("shape presets") {
  CHECK(is_shape_preset("rect1"));
  CHECK(is_shape_preset("hex"));
  CHECK(is_shape_preset("ellip2"));
  CHECK_FALSE(is_shape_preset("banana"));
  CHECK_THROWS_AS(shape_preset("banana"), ConfigError);

  CHECK(shape_preset("rect1").max_extent() ==
        doctest::Approx(0.045 * std::sqrt(2.0)));
  CHECK(shape_preset("hex").max_extent() == doctest::Approx(0.0605));
  CHECK(shape_preset("ellip2").max_extent() == doctest::Approx(0.13090 / 2));
}

TEST_CASE("fnv1a64 reference values") {
  // the zero-length hash is the offset basis
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("config digest is canonical") {
  const AppConfig defaults;
  const std::string digest = config_digest(defaults);
  CHECK(digest.size() == 16);
  CHECK(digest.find_first_not_of("0123456789abcdef") == std::string::npos);

  // same content, different key order
  const AppConfig reordered = parse_config(json::parse(
      R"({"trial": {"seed": 0, "steps": 1000}, "slam": {}})"));
  const AppConfig shuffled = parse_config(json::parse(
      R"({"slam": {}, "trial": {"steps": 1000, "seed": 0}})"));
  CHECK(config_digest(reordered) == config_digest(shuffled));
  CHECK(config_digest(reordered) == digest);  // defaults spelled explicitly

  // preset name and its expansion hash identically
  const AppConfig named = parse_config(json::parse(
      R"({"trial": {"shape": "rect1"}})"));
  const AppConfig spelled = parse_config(json::parse(
      R"({"trial": {"shape": {"kind": "square", "side_m": 0.09}}})"));
  CHECK(config_digest(named) == config_digest(spelled));

  AppConfig changed;
  changed.trial.steps = 999;
  CHECK(config_digest(changed) != digest);
}

TEST_CASE("config parsing is strict") {
  CHECK_THROWS_WITH_AS(
      parse_config(json::parse(R"({"trial": {"speeed_mps": 0.06}})")),
      doctest::Contains("trial.speeed_mps"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"bogus": 1})")),
                       doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(json::parse(R"({"trial": {"steps": "many"}})")),
      doctest::Contains("trial.steps"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(json::parse(R"({"trial": {"shape": {"kind": "blob"}}})")),
      ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"([1, 2])")), ConfigError);
}

TEST_CASE("config round trips through its json image") {
  AppConfig config;
  config.trial.shape_name = "hex";
  config.trial.shape = shape_preset("hex");
  config.trial.steps = 77;
  config.trial.reloc_count = 4;
  config.slam.two_worker = true;
  config.slam.graph.lag = 64;
  config.slam.gpis.local_gp_grid = 7;

  const json image = config_to_json(config);
  const AppConfig parsed = parse_config(image);
  CHECK(config_to_json(parsed) == image);
  CHECK(config_digest(parsed) == config_digest(config));
  CHECK(parsed.trial.steps == 77);
  CHECK(parsed.slam.graph.lag == 64);
  CHECK(parsed.trial.shape.kind() == config.trial.shape.kind());
}

TEST_CASE("trial log round trip is byte identical") {
  const TrialLog log = sample_log();
  const std::string first = dump_log(log);

  std::istringstream in(first);
  const TrialLog reread = read_trial_log(in);
  CHECK(dump_log(reread) == first);

  CHECK(reread.steps.size() == log.steps.size());
  CHECK(reread.true_c_ratio == log.true_c_ratio);
  int relocs = 0;
  for (const TrialStep& s : reread.steps) relocs += s.reloc ? 1 : 0;
  CHECK(relocs == 2);
  CHECK(config_digest({reread.config, SlamConfig{}}) ==
        config_digest({log.config, SlamConfig{}}));
}

TEST_CASE("trial log reader reports the offending line") {
  const std::string good = dump_log(sample_log());

  SUBCASE("empty stream") {
    std::istringstream in("");
    try {
      read_trial_log(in);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(e.line() == 1);
    }
  }

  SUBCASE("corrupt row") {
    std::string bad = good;
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) pos = bad.find('\n', pos) + 1;
    bad.insert(pos, "{not json}\n");
    std::istringstream in(bad);
    try {
      read_trial_log(in);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(e.line() == 5);
    }
  }

  SUBCASE("header must be a header") {
    std::istringstream in("{\"t\": 0}\n");
    try {
      read_trial_log(in);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(e.line() == 1);
    }
  }

  SUBCASE("timesteps must be dense") {
    std::string bad = good;
    const std::size_t at = bad.find("\"t\":3,");
    REQUIRE(at != std::string::npos);
    bad.replace(at, 6, "\"t\":9,");
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_trial_log(in), DataError);
  }
}

TEST_CASE("estimate and report serialization") {
  const TrialLog log = sample_log();
  const RunResult run = run_slam(log, SlamConfig{});

  std::ostringstream est;
  write_estimates(run, est);
  std::istringstream lines(est.str());
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    const json row = json::parse(line);
    CHECK(row.at("t") == rows);
    CHECK(row.at("est").is_array());
    CHECK(row.at("est").size() == 3);
    CHECK(row.contains("contour_version"));
    CHECK(row.contains("ms"));
    ++rows;
  }
  CHECK(rows == static_cast<int>(log.steps.size()));

  const json report = report_to_json(run.report);
  CHECK(report.at("trans_rmse_m").is_number());
  CHECK(report.at("rot_rmse_rad").is_number());
  CHECK(report.at("final_mhd_m").is_number());
  CHECK(report.at("mhd_series_m").size() == run.report.mhd_series.size());
  CHECK(report.at("timing_ms").size() == log.steps.size());

  std::ostringstream csv;
  write_report_csv(run.report, csv);
  std::istringstream csv_in(csv.str());
  std::getline(csv_in, line);
  CHECK(line == "series,index,value");
  int mhd_rows = 0, timing_rows = 0;
  while (std::getline(csv_in, line)) {
    if (line.rfind("mhd_m,", 0) == 0) ++mhd_rows;
    if (line.rfind("timing_ms,", 0) == 0) ++timing_rows;
  }
  CHECK(mhd_rows == static_cast<int>(run.report.mhd_series.size()));
  CHECK(timing_rows == static_cast<int>(run.report.timing_ms.size()));
}

TEST_CASE("manifest serialization") {
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config_digest = "00ff00ff00ff00ff";
  manifest.seed = 42;
  manifest.artifacts = {"a.jsonl", "b.json"};

  const json j = manifest_to_json(manifest);
  CHECK(j.at("command") == "simulate");
  CHECK(j.at("config_digest") == "00ff00ff00ff00ff");
  CHECK(j.at("seed") == 42);
  CHECK(j.at("artifacts").size() == 2);
  CHECK(j.contains("version"));
}
