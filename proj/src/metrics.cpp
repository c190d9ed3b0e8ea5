#include "tslam/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tslam {

namespace {

double directed_mean_distance(const std::vector<Point2>& from,
                              const std::vector<Point2>& to) {
  double sum = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double modified_hausdorff(const std::vector<Point2>& a,
                          const std::vector<Point2>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("modified_hausdorff: empty point set");
  return std::max(directed_mean_distance(a, b), directed_mean_distance(b, a));
}

PoseRmse pose_rmse(const std::vector<Pose2>& estimate,
                   const std::vector<Pose2>& ground_truth) {
  if (estimate.size() != ground_truth.size())
    throw std::invalid_argument("pose_rmse: series length mismatch");
  if (estimate.empty()) throw std::invalid_argument("pose_rmse: empty series");
  double t2 = 0.0, r2 = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    t2 += (estimate[i].translation() - ground_truth[i].translation()).squaredNorm();
    const double dth = wrap_angle(estimate[i].theta() - ground_truth[i].theta());
    r2 += dth * dth;
  }
  const double n = static_cast<double>(estimate.size());
  return PoseRmse{std::sqrt(t2 / n), std::sqrt(r2 / n)};
}

double shape_error_at(const std::vector<Point2>& contour, const Pose2& alignment,
                      const GroundTruthShape& gt_shape, int gt_samples) {
  if (contour.empty()) throw std::invalid_argument("shape_error_at: empty contour");
  std::vector<Point2> aligned;
  aligned.reserve(contour.size());
  for (const auto& p : contour) aligned.push_back(alignment.to_world(p));
  return modified_hausdorff(aligned, gt_shape.sample_boundary(gt_samples));
}

}  // namespace tslam
