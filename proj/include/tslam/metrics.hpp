#pragma once

#include <vector>

#include "tslam/geometry.hpp"

namespace tslam {

/// Modified Hausdorff distance: max of the two directed mean
/// nearest-neighbor distances.
double modified_hausdorff(const std::vector<Point2>& a,
                          const std::vector<Point2>& b);

struct PoseRmse {
  double translation = 0.0;  // m
  double rotation = 0.0;     // rad, differences wrapped to (-pi, pi]
};

PoseRmse pose_rmse(const std::vector<Pose2>& estimate,
                   const std::vector<Pose2>& ground_truth);

/// Shape fidelity of a model contour against the analytic boundary.
/// `alignment` maps contour coordinates into the ground-truth object frame
/// (identity compares the frames as-is, so unobservable initial-pose offset
/// shows up in the score).
double shape_error_at(const std::vector<Point2>& contour, const Pose2& alignment,
                      const GroundTruthShape& gt_shape, int gt_samples = 500);

struct EvalReport {
  double trans_rmse = 0.0;          // m
  double rot_rmse = 0.0;            // rad
  std::vector<double> mhd_series;   // m, one entry per contour update
  std::vector<double> timing_ms;    // per-step estimation wall time
  double final_mhd = 0.0;           // m
};

}  // namespace tslam
