#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tslam/dynamics.hpp"
#include "tslam/geometry.hpp"

namespace tslam {

struct TrialConfig {
  std::string shape_name = "rect1";
  GroundTruthShape shape = GroundTruthShape::square(0.09);
  int fingers = 2;
  double probe_radius = 6.25e-3;
  double finger_spacing = 0.03;
  double speed = 0.06;
  double dt = 1.0 / 60.0;
  int steps = 1000;
  double noise_pos_std = 1e-4;
  double noise_force_std = 0.01;
  double contact_threshold = 0.01;
  // Inward bias of the contour follower. Lower values press more lightly,
  // which also means the object gets displaced less over a trial.
  double follow_gain = 0.4;
  Eigen::Vector3d perturbation{2e-3, 2e-3, 5.0 * M_PI / 180.0};
  int reloc_count = 0;
  Eigen::Vector3d reloc_noise{1e-3, 1e-3, 0.01};
  // Pusher-object friction felt by the plant. Zero keeps the reaction force
  // along the surface normal, which is what the contact-point reconstruction
  // p - r*f/|f| assumes; raise it (or twist_jitter) for mismatch studies.
  double mu = 0.0;
  // > 0 adds per-component multiplicative twist perturbation of this
  // magnitude, breaking exact agreement with the pushing model on purpose
  double twist_jitter = 0.0;
  double c_ratio_override = 0.0;  // <= 0: Monte-Carlo value for the shape
  std::uint64_t seed = 0;
};

struct TrialStep {
  int t = 0;
  TactileMeasurement z;
  Pose2 gt;
  std::optional<Pose2> reloc;
};

struct TrialLog {
  TrialConfig config;
  double true_c_ratio = 0.0;
  std::vector<TrialStep> steps;
};

/// Tangential exploration command from the last sensed reaction direction:
/// the counterclockwise perpendicular of the normal plus an inward bias
/// that keeps the probe pressed against the receding surface.
Eigen::Vector2d contour_follow_command(const Point2& pusher,
                                       const Eigen::Vector2d& sensed_normal,
                                       double speed, double inward_gain = 0.4);

/// Mean distance of the shape's area from its centroid; memoized per shape.
double shape_c_ratio(const GroundTruthShape& shape);

/// Plant for one pusher-slider trial. The pusher rig carries one or two
/// probe fingers; the object responds with an ellipsoid-limit-surface twist
/// computed from the same wrench that the emitted measurement implies, so a
/// noise-free log is exactly consistent with the estimator's pushing model.
class PushSimulator {
 public:
  explicit PushSimulator(const TrialConfig& config);

  /// Advances the rig by command*dt, resolves finger contacts, emits one
  /// measurement that carries the summed contact wrench (the position is the
  /// real probe center for a single touch, the equivalent-wrench center when
  /// both fingers press), pairs it with the pre-step object pose, and then
  /// integrates the object.
  TrialStep step(const Eigen::Vector2d& command);

  /// Approach command before first touch, contour following afterwards.
  Eigen::Vector2d follow_command() const;

  const Pose2& object_pose() const { return object_pose_; }
  Point2 finger_position(int index) const;
  double true_c_ratio() const { return c_ratio_; }
  bool ever_contacted() const { return ever_contacted_; }
  const Eigen::Vector2d& sensed_normal() const { return sensed_normal_; }
  int steps_taken() const { return t_; }

 private:
  TrialConfig config_;
  double c_ratio_ = 0.0;
  Pose2 object_pose_;
  Point2 rig_;                    // reference finger position, world
  Eigen::Vector2d travel_dir_;    // unit direction of the last command
  Eigen::Vector2d sensed_normal_; // unit, world; persists through separation
  bool ever_contacted_ = false;
  int separated_steps_ = 0;       // steps since the last finger contact
  int t_ = 0;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 jitter_rng_;
};

TrialLog run_trial(const TrialConfig& config);

}  // namespace tslam
