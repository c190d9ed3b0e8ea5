#pragma once

#include <cstdint>

#include "tslam/geometry.hpp"

namespace tslam {

struct PushParams {
  double c_ratio = 0.0266666666666667;  // tau_max / f_max, meters
  double mu_contact = 0.25;             // pusher-object friction coefficient
  double probe_radius = 0.00625;        // meters
};

enum class ContactMode : std::uint8_t { kSeparated, kSticking, kSlipping };

/// One tactile sample: pusher position, sensed reaction force, contact flag.
struct TactileMeasurement {
  Point2 pusher_pos = Point2::Zero();            // world, meters
  Eigen::Vector2d force = Eigen::Vector2d::Zero();  // on the pusher, Newtons
  bool contact = false;
};

/// Contact solution in the frame of the inputs (callers pass body frame).
struct ContactState {
  ContactMode mode = ContactMode::kSeparated;
  Point2 contact_point = Point2::Zero();
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();  // outward from object
  Eigen::Vector2d force = Eigen::Vector2d::Zero();   // on the object
};

/// Twist normal to the ellipsoid limit surface at the wrench implied by a
/// point force. Scaled so the contact-point velocity component along the
/// pushing direction equals `push_speed`. Frame follows the inputs.
Twist2 limit_surface_twist(const Point2& contact, const Eigen::Vector2d& force,
                           double c_ratio, double push_speed = 1.0);

/// Quasi-static single-point push: classifies sticking/slipping/separation
/// and returns the consistent contact force plus the object twist. All
/// quantities in the object body frame. The force magnitude is normalized so
/// the wrench lies on the unit limit surface (f_max = 1 N).
ContactState resolve_push(const Eigen::Vector2d& pusher_velocity,
                          const Point2& contact, const Eigen::Vector2d& normal,
                          const PushParams& params, Twist2* twist = nullptr);

/// Recovers the contact point and outward normal from a pusher-frame force
/// measurement (reaction on the pusher points along the outward normal).
/// Returns contact flag ||f|| >= force_threshold.
bool contact_from_measurement(const Point2& pusher_pos,
                              const Eigen::Vector2d& force,
                              double probe_radius, double force_threshold,
                              Point2* contact_point, Eigen::Vector2d* normal);

/// tau_max/f_max for a uniform-pressure disk: (2/3) * radius.
double c_ratio_for_disk(double radius);

/// tau_max/f_max of an arbitrary uniform-pressure shape, computed by seeded
/// Monte-Carlo integration over the support area.
double c_ratio_monte_carlo(const GroundTruthShape& shape,
                           int samples = 2000000);

}  // namespace tslam
