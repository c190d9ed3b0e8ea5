#include "tslam/geometry.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tslam {

double wrap_angle(double theta) {
  double t = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (t <= 0.0) t += 2.0 * M_PI;
  return t - M_PI;
}

Pose2::Pose2(double x, double y, double theta)
    : x_(x), y_(y), theta_(wrap_angle(theta)) {}

Eigen::Matrix2d Pose2::rotation() const {
  const double c = std::cos(theta_), s = std::sin(theta_);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Pose2 Pose2::compose(const Pose2& other) const {
  const Point2 t = to_world(other.translation());
  return Pose2(t.x(), t.y(), theta_ + other.theta_);
}

Pose2 Pose2::inverse() const {
  const double c = std::cos(theta_), s = std::sin(theta_);
  return Pose2(-(c * x_ + s * y_), -(-s * x_ + c * y_), -theta_);
}

Pose2 Pose2::between(const Pose2& other) const {
  return inverse().compose(other);
}

Point2 Pose2::to_world(const Point2& body) const {
  return rotation() * body + translation();
}

Point2 Pose2::to_body(const Point2& world) const {
  return rotation().transpose() * (world - translation());
}

Eigen::Vector2d Pose2::rotate_to_world(const Eigen::Vector2d& v) const {
  return rotation() * v;
}

Eigen::Vector2d Pose2::rotate_to_body(const Eigen::Vector2d& v) const {
  return rotation().transpose() * v;
}

namespace {

// V(theta) such that exp translation = V * (dx, dy).
Eigen::Matrix2d se2_v(double theta) {
  double a, b;
  if (std::abs(theta) < 1e-8) {
    a = 1.0 - theta * theta / 6.0;
    b = 0.5 * theta - theta * theta * theta / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta;
  }
  Eigen::Matrix2d v;
  v << a, -b, b, a;
  return v;
}

}  // namespace

Pose2 Pose2::exp(const Eigen::Vector3d& xi) {
  const Eigen::Vector2d t = se2_v(xi.z()) * xi.head<2>();
  return Pose2(t.x(), t.y(), xi.z());
}

Eigen::Vector3d Pose2::log() const {
  const Eigen::Matrix2d v = se2_v(theta_);
  const Eigen::Vector2d u = v.inverse() * translation();
  return Eigen::Vector3d(u.x(), u.y(), theta_);
}

Pose2 Pose2::retract(const Eigen::Vector3d& delta) const {
  return compose(exp(delta));
}

Eigen::Vector3d Pose2::local(const Pose2& other) const {
  return between(other).log();
}

PolylineProjection project_to_polyline(const std::vector<Point2>& poly,
                                       const Point2& p) {
  if (poly.size() < 2) throw std::invalid_argument("polyline needs >= 2 points");
  PolylineProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2 d = poly[i + 1] - a;
    const double len2 = d.squaredNorm();
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    const Point2 q = a + t * d;
    const double dist = (p - q).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.point = q;
      best.segment = static_cast<int>(i);
    }
  }
  return best;
}

bool point_in_polygon(const std::vector<Point2>& poly, const Point2& p) {
  // even-odd rule; tolerates an explicitly closed input
  size_t n = poly.size();
  if (n >= 2 && poly.front() == poly.back()) --n;
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    const bool crosses = (a.y() > p.y()) != (b.y() > p.y());
    if (crosses) {
      const double x_at = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x_at) inside = !inside;
    }
  }
  return inside;
}

double polyline_signed_distance(const std::vector<Point2>& poly,
                                const Point2& p) {
  const double d = project_to_polyline(poly, p).distance;
  return point_in_polygon(poly, p) ? -d : d;
}

double polygon_signed_area(const std::vector<Point2>& poly) {
  size_t n = poly.size();
  if (n >= 2 && poly.front() == poly.back()) --n;
  double twice = 0.0;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    twice += cross2(poly[j], poly[i]);
  }
  return 0.5 * twice;
}

GroundTruthShape GroundTruthShape::square(double side_m) {
  if (side_m <= 0.0) throw std::invalid_argument("square side must be positive");
  GroundTruthShape s;
  s.kind_ = Kind::kSquare;
  const double h = 0.5 * side_m;
  s.vertices_ = {Point2(h, -h), Point2(h, h), Point2(-h, h), Point2(-h, -h)};
  return s;
}

GroundTruthShape GroundTruthShape::regular_polygon(int sides,
                                                   double circumradius_m) {
  if (sides < 3) throw std::invalid_argument("polygon needs >= 3 sides");
  if (circumradius_m <= 0.0)
    throw std::invalid_argument("circumradius must be positive");
  GroundTruthShape s;
  s.kind_ = Kind::kRegularPolygon;
  s.vertices_.reserve(sides);
  for (int k = 0; k < sides; ++k) {
    const double a = 2.0 * M_PI * k / sides;
    s.vertices_.emplace_back(circumradius_m * std::cos(a),
                             circumradius_m * std::sin(a));
  }
  return s;
}

GroundTruthShape GroundTruthShape::ellipse(double major_axis_m,
                                           double minor_axis_m) {
  if (major_axis_m <= 0.0 || minor_axis_m <= 0.0)
    throw std::invalid_argument("ellipse axes must be positive");
  GroundTruthShape s;
  s.kind_ = Kind::kEllipse;
  s.semi_major_ = 0.5 * major_axis_m;
  s.semi_minor_ = 0.5 * minor_axis_m;
  return s;
}

namespace {

// Closest point on an axis-aligned ellipse (semi-axes a >= b would be the
// textbook setup; handled for either ordering by the caller folding axes).
// Robust bisection on F(t) = (a*qx/(t+a^2))^2 + (b*qy/(t+b^2))^2 - 1.
Point2 ellipse_closest_first_quadrant(double a, double b, double qx, double qy) {
  const double tiny = 1e-14;
  if (qx < tiny && qy < tiny) return Point2(0.0, b);  // center: minor vertex
  if (qy < tiny) {
    // on the major axis; medial segment ends at a - b^2/a from the vertex
    const double xm = (a * a - b * b) / a;
    if (qx >= xm)
      return Point2(a, 0.0);
    const double x = a * a * qx / (a * a - b * b);
    const double y = b * std::sqrt(std::max(0.0, 1.0 - (x / a) * (x / a)));
    return Point2(x, y);
  }
  if (qx < tiny) return Point2(0.0, b);
  double lo = -b * b + b * qy;
  double hi = -b * b + std::sqrt(a * a * qx * qx + b * b * qy * qy);
  auto f = [&](double t) {
    const double u = a * qx / (t + a * a);
    const double v = b * qy / (t + b * b);
    return u * u + v * v - 1.0;
  };
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  return Point2(a * a * qx / (t + a * a), b * b * qy / (t + b * b));
}

}  // namespace

double GroundTruthShape::signed_distance(const Point2& p) const {
  if (kind_ == Kind::kEllipse) {
    const auto [q, n] = closest_boundary_point(p);
    (void)n;
    const double d = (p - q).norm();
    const double r2 = (p.x() / semi_major_) * (p.x() / semi_major_) +
                      (p.y() / semi_minor_) * (p.y() / semi_minor_);
    return r2 < 1.0 ? -d : d;
  }
  std::vector<Point2> closed = vertices_;
  closed.push_back(vertices_.front());
  return polyline_signed_distance(closed, p);
}

bool GroundTruthShape::contains(const Point2& p) const {
  if (kind_ == Kind::kEllipse) {
    const double u = p.x() / semi_major_;
    const double v = p.y() / semi_minor_;
    return u * u + v * v <= 1.0;
  }
  return point_in_polygon(vertices_, p);
}

std::pair<Point2, Eigen::Vector2d> GroundTruthShape::closest_boundary_point(
    const Point2& p) const {
  if (kind_ == Kind::kEllipse) {
    const bool swap = semi_minor_ > semi_major_;
    const double a = swap ? semi_minor_ : semi_major_;
    const double b = swap ? semi_major_ : semi_minor_;
    double u = swap ? p.y() : p.x();
    double v = swap ? p.x() : p.y();
    const double su = u < 0.0 ? -1.0 : 1.0;
    const double sv = v < 0.0 ? -1.0 : 1.0;
    Point2 q = ellipse_closest_first_quadrant(a, b, su * u, sv * v);
    q = Point2(su * q.x(), sv * q.y());
    if (swap) q = Point2(q.y(), q.x());
    Eigen::Vector2d n(q.x() / (semi_major_ * semi_major_),
                      q.y() / (semi_minor_ * semi_minor_));
    return {q, n.normalized()};
  }

  std::vector<Point2> closed = vertices_;
  closed.push_back(vertices_.front());
  const PolylineProjection proj = project_to_polyline(closed, p);
  Eigen::Vector2d n;
  const double d = proj.distance;
  if (d > 1e-9) {
    const bool inside = point_in_polygon(closed, p);
    n = (inside ? (proj.point - p) : (p - proj.point)) / d;
  } else {
    // on the boundary: fall back to the edge normal (CCW polygon)
    const Point2 e = closed[proj.segment + 1] - closed[proj.segment];
    n = -perp(e).normalized();
  }
  return {proj.point, n};
}

double GroundTruthShape::perimeter() const {
  if (kind_ != Kind::kEllipse) {
    double total = 0.0;
    for (size_t i = 0; i < vertices_.size(); ++i)
      total += (vertices_[(i + 1) % vertices_.size()] - vertices_[i]).norm();
    return total;
  }
  // Simpson quadrature of the arc-length integrand
  const int n = 4096;
  const double h = 2.0 * M_PI / n;
  auto speed = [&](double t) {
    const double dx = -semi_major_ * std::sin(t);
    const double dy = semi_minor_ * std::cos(t);
    return std::hypot(dx, dy);
  };
  double sum = speed(0.0) + speed(2.0 * M_PI);
  for (int i = 1; i < n; ++i) sum += speed(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double GroundTruthShape::max_extent() const {
  if (kind_ == Kind::kEllipse) return std::max(semi_major_, semi_minor_);
  double r = 0.0;
  for (const auto& v : vertices_) r = std::max(r, v.norm());
  return r;
}

std::vector<Point2> GroundTruthShape::sample_boundary(
    int n, double arclength_phase_m) const {
  if (n < 3) throw std::invalid_argument("boundary sampling needs n >= 3");

  std::vector<Point2> out;
  out.reserve(n);
  const double total = perimeter();

  if (kind_ != Kind::kEllipse) {
    const size_t m = vertices_.size();
    std::vector<double> cum(m + 1, 0.0);
    for (size_t i = 0; i < m; ++i)
      cum[i + 1] = cum[i] + (vertices_[(i + 1) % m] - vertices_[i]).norm();
    for (int k = 0; k < n; ++k) {
      double s = std::fmod(arclength_phase_m + total * k / n, total);
      if (s < 0.0) s += total;
      size_t seg = 0;
      while (seg + 1 < m && cum[seg + 1] < s) ++seg;
      const double local = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
      out.push_back(vertices_[seg] +
                    local * (vertices_[(seg + 1) % m] - vertices_[seg]));
    }
    return out;
  }

  // ellipse: invert a cumulative chord-length table (dense enough that the
  // residual non-uniformity is far below a grid cell)
  const int table_n = 8192;
  if (arc_table_.empty()) {
    arc_table_.resize(table_n + 1, 0.0);
    Point2 prev(semi_major_, 0.0);
    for (int i = 1; i <= table_n; ++i) {
      const double t = 2.0 * M_PI * i / table_n;
      const Point2 cur(semi_major_ * std::cos(t), semi_minor_ * std::sin(t));
      arc_table_[i] = arc_table_[i - 1] + (cur - prev).norm();
      prev = cur;
    }
  }
  const double chord_total = arc_table_.back();
  for (int k = 0; k < n; ++k) {
    double s = std::fmod(arclength_phase_m + total * k / n, total);
    if (s < 0.0) s += total;
    const double target = s / total * chord_total;
    const auto it = std::lower_bound(arc_table_.begin(), arc_table_.end(), target);
    size_t hi = std::min<size_t>(arc_table_.size() - 1,
                                 std::max<size_t>(1, it - arc_table_.begin()));
    const double seg = arc_table_[hi] - arc_table_[hi - 1];
    const double frac = seg > 0.0 ? (target - arc_table_[hi - 1]) / seg : 0.0;
    const double t = 2.0 * M_PI * (hi - 1 + frac) / table_n;
    out.emplace_back(semi_major_ * std::cos(t), semi_minor_ * std::sin(t));
  }
  return out;
}

}  // namespace tslam
