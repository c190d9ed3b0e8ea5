#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace tslam {

using Point2 = Eigen::Vector2d;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

/// z-component of the cross product of two planar vectors.
inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// CCW perpendicular: (x, y) -> (-y, x).
inline Eigen::Vector2d perp(const Eigen::Vector2d& v) {
  return Eigen::Vector2d(-v.y(), v.x());
}

struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Eigen::Vector3d vec() const { return Eigen::Vector3d(vx, vy, omega); }
};

/// Planar rigid transform. Heading is kept wrapped to (-pi, pi].
class Pose2 {
 public:
  Pose2() = default;
  Pose2(double x, double y, double theta);

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }

  Point2 translation() const { return Point2(x_, y_); }
  Eigen::Matrix2d rotation() const;

  Pose2 compose(const Pose2& other) const;
  Pose2 inverse() const;
  /// Relative transform such that *this * between(other) == other.
  Pose2 between(const Pose2& other) const;

  Point2 to_world(const Point2& body) const;
  Point2 to_body(const Point2& world) const;
  Eigen::Vector2d rotate_to_world(const Eigen::Vector2d& body_vec) const;
  Eigen::Vector2d rotate_to_body(const Eigen::Vector2d& world_vec) const;

  /// Exponential map from tangent coordinates (dx, dy, dtheta).
  static Pose2 exp(const Eigen::Vector3d& xi);
  Eigen::Vector3d log() const;

  /// Right-multiplied local update: this * exp(delta).
  Pose2 retract(const Eigen::Vector3d& delta) const;
  /// Tangent coordinates of `other` relative to *this: log(between(other)).
  Eigen::Vector3d local(const Pose2& other) const;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

struct PolylineProjection {
  Point2 point = Point2::Zero();  // closest point on the polyline
  int segment = 0;                // index of the segment containing it
  double distance = 0.0;
};

/// Closest point on a polyline (closed if front() == back()).
PolylineProjection project_to_polyline(const std::vector<Point2>& poly,
                                       const Point2& p);

/// Even-odd test; `poly` may be open (implicitly closed) or closed.
bool point_in_polygon(const std::vector<Point2>& poly, const Point2& p);

/// Signed distance to the region bounded by a closed polyline (negative inside).
double polyline_signed_distance(const std::vector<Point2>& poly,
                                const Point2& p);

double polygon_signed_area(const std::vector<Point2>& poly);

/// Analytic benchmark shapes, centered at the body-frame origin.
class GroundTruthShape {
 public:
  enum class Kind { kSquare, kRegularPolygon, kEllipse };

  static GroundTruthShape square(double side_m);
  static GroundTruthShape regular_polygon(int sides, double circumradius_m);
  /// Axis lengths are full diameters along x and y.
  static GroundTruthShape ellipse(double major_axis_m, double minor_axis_m);

  Kind kind() const { return kind_; }

  /// Exact signed distance, negative inside.
  double signed_distance(const Point2& p) const;

  /// Interior test; cheaper than signed_distance for ellipses.
  bool contains(const Point2& p) const;

  /// Closest boundary point and the outward unit normal there.
  std::pair<Point2, Eigen::Vector2d> closest_boundary_point(
      const Point2& p) const;

  /// n points, counterclockwise, approximately uniform in arc length.
  /// `arclength_phase_m` shifts the start point along the perimeter.
  std::vector<Point2> sample_boundary(int n, double arclength_phase_m = 0.0) const;

  double perimeter() const;
  /// Radius of the smallest origin-centered circle containing the shape.
  double max_extent() const;

  const std::vector<Point2>& vertices() const { return vertices_; }
  double semi_major() const { return semi_major_; }
  double semi_minor() const { return semi_minor_; }

 private:
  GroundTruthShape() = default;

  Kind kind_ = Kind::kSquare;
  std::vector<Point2> vertices_;  // polygon kinds only, CCW, not repeated
  double semi_major_ = 0.0;
  double semi_minor_ = 0.0;
  // ellipse arc-length lookup, built lazily on first boundary sampling
  mutable std::vector<double> arc_table_;
};

}  // namespace tslam
