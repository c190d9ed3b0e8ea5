#include <doctest.h>

#include <cmath>
#include <set>

#include "tslam/pipeline.hpp"

using namespace tslam;

namespace {

TrialLog noisy_log(int steps, std::uint64_t seed) {
  TrialConfig config;
  config.steps = steps;
  config.seed = seed;
  return run_trial(config);
}

}  // namespace

TEST_CASE("first step reproduces the pose prior") {
  SlamConfig config;
  TactileSlam slam(config);

  TactileMeasurement free;
  free.pusher_pos = {0.2, 0.0};
  free.contact = false;
  const StepResult r = slam.process_measurement(free);

  CHECK(r.pose.translation().norm() < 1e-12);
  CHECK(std::abs(r.pose.theta()) < 1e-12);
  CHECK(r.contour_version == 0);
  CHECK(r.solver_ok);
  CHECK(slam.smoother().c_ratio() ==
        doctest::Approx(config.graph.c_ratio_init));

  // the prior circle is available before any data arrives
  REQUIRE(r.contour);
  CHECK(r.contour->front() == r.contour->back());
}

TEST_CASE("rejects empty logs and bad periods") {
  TrialLog empty;
  CHECK_THROWS_AS(run_slam(empty, SlamConfig{}), std::invalid_argument);

  SlamConfig config;
  config.gpis_update_period = 0;
  CHECK_THROWS_AS(TactileSlam{config}, std::invalid_argument);
}

TEST_CASE("shape insertions are consistent with the pose that made them") {
  const TrialLog log = noisy_log(120, 42);
  SlamConfig config;
  TactileSlam slam(config);
  for (const TrialStep& step : log.steps)
    slam.process_measurement(step.z, step.reloc);

  REQUIRE(!slam.insertions().empty());
  for (const InsertionRecord& rec : slam.insertions()) {
    CHECK((rec.pose_used.to_body(rec.world_point) - rec.observation.point)
              .norm() < 1e-12);
    CHECK(rec.observation.normal.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rec.t % config.gpis_update_period == 0);
    CHECK(log.steps[rec.t].z.contact);
  }
}

TEST_CASE("contour snapshots are only used after the step that built them") {
  const TrialLog log = noisy_log(100, 43);
  SlamConfig config;
  TactileSlam slam(config);

  std::vector<StepResult> results;
  for (const TrialStep& step : log.steps)
    results.push_back(slam.process_measurement(step.z, step.reloc));

  std::map<int, int> built_at;  // version -> step
  for (const ContourRecord& rec : slam.contour_history()) {
    built_at[rec.version] = rec.t;
    if (rec.version > 0) CHECK(rec.t % config.contour_update_period == 0);
  }
  for (int t = 0; t < static_cast<int>(results.size()); ++t) {
    const int v = results[t].contour_version;
    REQUIRE(built_at.count(v));
    CHECK(built_at[v] < t);  // never the snapshot produced by this very step
    // and no newer snapshot existed before this step
    if (built_at.count(v + 1)) CHECK(built_at[v + 1] >= t);
  }
}

TEST_CASE("background shape worker changes nothing but the schedule") {
  const TrialLog log = noisy_log(90, 44);

  SlamConfig serial;
  SlamConfig threaded;
  threaded.two_worker = true;

  TactileSlam a(serial);
  TactileSlam b(threaded);
  for (const TrialStep& step : log.steps) {
    const StepResult ra = a.process_measurement(step.z, step.reloc);
    const StepResult rb = b.process_measurement(step.z, step.reloc);
    CHECK(ra.pose.translation() == rb.pose.translation());
    CHECK(ra.pose.theta() == rb.pose.theta());
    CHECK(ra.contour_version == rb.contour_version);
  }
  a.finish();
  b.finish();
  REQUIRE(a.insertions().size() == b.insertions().size());
  for (std::size_t i = 0; i < a.insertions().size(); ++i) {
    CHECK(a.insertions()[i].accepted == b.insertions()[i].accepted);
    CHECK((a.insertions()[i].observation.point -
           b.insertions()[i].observation.point).norm() == 0.0);
  }
  CHECK(a.contour_version() == b.contour_version());
}

TEST_CASE("replay scores against the log's ground truth") {
  const TrialLog log = noisy_log(150, 45);
  const RunResult result = run_slam(log, SlamConfig{});

  CHECK(result.steps.size() == log.steps.size());
  CHECK(result.report.timing_ms.size() == log.steps.size());
  CHECK(!result.report.mhd_series.empty());
  CHECK(result.report.final_mhd == result.report.mhd_series.back());
  CHECK(result.report.final_mhd > 0.0);
}

TEST_CASE("noise-free replay stays locked to the truth") {
  TrialConfig tc;
  tc.fingers = 1;
  tc.steps = 300;
  tc.noise_pos_std = 0.0;
  tc.noise_force_std = 0.0;
  tc.perturbation = Eigen::Vector3d::Zero();
  tc.seed = 11;
  const TrialLog log = run_trial(tc);

  SlamConfig config;
  config.gpis_update_period = 1;
  config.contour_update_period = 1;
  config.graph.c_ratio_init = log.true_c_ratio;
  const RunResult result = run_slam(log, config);

  for (std::size_t t = 0; t < log.steps.size(); ++t) {
    const Pose2 err = log.steps[t].gt.between(result.steps[t].pose);
    CHECK(err.translation().norm() < 5e-4);
    CHECK(std::abs(err.theta()) < 5e-3);
  }
}

TEST_CASE("estimation improves the shape beyond the prior circle") {
  const TrialLog log = noisy_log(400, 46);
  const RunResult result = run_slam(log, SlamConfig{});

  // score the untouched prior circle the same way the pipeline does
  GpisModel fresh{GpisConfig{}};
  const double prior_mhd = shape_error_at(fresh.extract_contour(), Pose2(),
                                          log.config.shape);

  CHECK(result.report.final_mhd < prior_mhd);
  CHECK(result.report.trans_rmse < 0.02);
  CHECK(result.report.rot_rmse < 0.2);
}
