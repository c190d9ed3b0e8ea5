#pragma once

#include <future>
#include <memory>
#include <optional>
#include <vector>

#include "tslam/factor_graph.hpp"
#include "tslam/gpis.hpp"
#include "tslam/metrics.hpp"
#include "tslam/simulator.hpp"

namespace tslam {

struct SlamConfig {
  GpisConfig gpis;
  GraphConfig graph;
  int gpis_update_period = 5;     // steps between shape insertions
  int contour_update_period = 10; // steps between contour refreshes
  bool two_worker = false;        // offload shape updates to a worker thread
};

struct StepResult {
  Pose2 pose;
  ContourPtr contour;  // snapshot the step's factors used
  int contour_version = 0;
  double wall_ms = 0.0;
  bool solver_ok = true;
  OptimizeDiagnostics diagnostics;
};

struct InsertionRecord {
  int t = 0;
  Point2 world_point = Point2::Zero();
  Pose2 pose_used;
  SurfaceObservation observation;  // object frame
  bool accepted = false;
};

struct ContourRecord {
  int t = 0;  // step whose shape update produced this snapshot
  int version = 0;
  ContourPtr contour;
};

/// Alternates fixed-lag pose optimization with GPIS shape regression:
/// each measurement is optimized against the latest frozen contour, and the
/// shape model is periodically refit using the freshly optimized poses.
class TactileSlam {
 public:
  explicit TactileSlam(const SlamConfig& config);
  ~TactileSlam();

  TactileSlam(const TactileSlam&) = delete;
  TactileSlam& operator=(const TactileSlam&) = delete;

  /// Installs known boundary geometry (object frame) before the run starts,
  /// so pose estimation begins against the real contour instead of the
  /// circular prior. Only valid before the first measurement.
  void seed_shape(const std::vector<SurfaceObservation>& surface);

  StepResult process_measurement(const TactileMeasurement& z,
                                 const std::optional<Pose2>& reloc = {});

  /// Blocks until any in-flight shape update has been applied.
  void finish();

  const SlamConfig& config() const { return config_; }
  const FixedLagSmoother& smoother() const { return smoother_; }
  const GpisModel& gpis();
  ContourPtr contour();
  int contour_version();
  const std::vector<InsertionRecord>& insertions();
  const std::vector<ContourRecord>& contour_history();
  int dropped_observations();
  int solver_failures() const { return solver_failures_; }

 private:
  struct ShapeJob {
    int t = 0;
    std::optional<InsertionRecord> insertion;
    bool extract = false;
  };
  struct ShapeJobOutcome {
    std::optional<InsertionRecord> insertion;
    ContourPtr contour;  // null when extraction skipped or empty
    int t = 0;
  };

  ShapeJobOutcome run_shape_job(ShapeJob job);
  void apply(ShapeJobOutcome outcome);
  void apply_pending();

  SlamConfig config_;
  GpisModel gpis_;
  FixedLagSmoother smoother_;
  ContourPtr contour_;
  int contour_version_ = 0;
  int step_ = 0;
  int dropped_ = 0;
  int solver_failures_ = 0;
  std::vector<InsertionRecord> insertions_;
  std::vector<ContourRecord> contour_history_;
  std::future<ShapeJobOutcome> pending_;
};

struct RunResult {
  EvalReport report;
  std::vector<StepResult> steps;
  std::vector<ContourRecord> contours;
};

/// Replays a recorded trial through the pipeline and scores it against the
/// log's ground truth. Shape error is evaluated in the ground-truth object
/// frame using the per-step alignment gt^-1 * estimate, so world pose drift
/// common to both cancels out of the shape score.
RunResult run_slam(const TrialLog& log, const SlamConfig& config);

}  // namespace tslam
