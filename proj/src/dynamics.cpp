#include "tslam/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace tslam {

namespace {

// Velocity of the contact point under a unit-scale limit-surface twist
// (f, cross(c,f)/C^2).
Eigen::Vector2d contact_velocity_dir(const Point2& c, const Eigen::Vector2d& f,
                                     double c_ratio) {
  const double omega = cross2(c, f) / (c_ratio * c_ratio);
  return f + omega * perp(c);
}

}  // namespace

Twist2 limit_surface_twist(const Point2& contact, const Eigen::Vector2d& force,
                           double c_ratio, double push_speed) {
  const double fn = force.norm();
  if (fn <= 0.0) throw std::invalid_argument("limit_surface_twist: zero force");
  if (c_ratio <= 0.0)
    throw std::invalid_argument("limit_surface_twist: c_ratio must be positive");

  const Eigen::Vector2d u = contact_velocity_dir(contact, force, c_ratio);
  // u . f = |f|^2 + tau^2/C^2 > 0, so the projection never degenerates
  const double s = push_speed / (u.dot(force) / fn);
  Twist2 xi;
  xi.vx = s * force.x();
  xi.vy = s * force.y();
  xi.omega = s * cross2(contact, force) / (c_ratio * c_ratio);
  return xi;
}

ContactState resolve_push(const Eigen::Vector2d& pusher_velocity,
                          const Point2& contact, const Eigen::Vector2d& normal,
                          const PushParams& params, Twist2* twist) {
  ContactState state;
  state.contact_point = contact;
  state.normal = normal;
  if (twist) *twist = Twist2{};

  const double c2 = params.c_ratio * params.c_ratio;
  const Eigen::Vector2d n = normal.normalized();
  const Eigen::Vector2d t = perp(n);

  if (pusher_velocity.dot(n) >= 0.0) return state;  // moving away: no push

  // Sticking trial: contact point moves with the pusher. With v = k f the
  // limit-surface constraint reduces to a rank-one-corrected linear solve.
  const Eigen::Vector2d w = perp(contact);
  const Eigen::Vector2d v =
      pusher_velocity - w * (w.dot(pusher_velocity) / (c2 + w.squaredNorm()));
  const double v_norm = v.norm();
  bool sticking = false;
  if (v_norm > 1e-12) {
    const Eigen::Vector2d f_dir = v / v_norm;
    const double f_n = f_dir.dot(n);
    const double f_t = f_dir.dot(t);
    sticking = f_n < 0.0 && std::abs(f_t) <= params.mu_contact * (-f_n) + 1e-9;
    if (sticking) {
      const double tau = cross2(contact, f_dir);
      const double mag = 1.0 / std::sqrt(1.0 + tau * tau / c2);
      state.mode = ContactMode::kSticking;
      state.force = mag * f_dir;
      if (twist) {
        twist->vx = v.x();
        twist->vy = v.y();
        twist->omega = w.dot(v) / c2;
      }
      return state;
    }
  }

  // Slipping: force on a friction-cone edge; pick the edge whose tangential
  // component opposes the slip of the object relative to the pusher.
  const double vp_n = pusher_velocity.dot(n);
  double best_err = std::numeric_limits<double>::infinity();
  for (const double sigma : {1.0, -1.0}) {
    const Eigen::Vector2d e = (-n + sigma * params.mu_contact * t).normalized();
    const Eigen::Vector2d u = contact_velocity_dir(contact, e, params.c_ratio);
    const double un = u.dot(n);
    if (un >= -1e-12) continue;  // edge cannot yield the surface
    const double q = vp_n / un;
    if (q <= 0.0) continue;
    const Eigen::Vector2d vc = q * u;
    const double slip = (pusher_velocity - vc).dot(t);
    const double err = sigma * slip >= -1e-9 ? 0.0 : std::abs(slip);
    if (err < best_err) {
      best_err = err;
      const double tau = cross2(contact, e);
      const double mag = 1.0 / std::sqrt(1.0 + tau * tau / c2);
      state.mode = ContactMode::kSlipping;
      state.force = mag * e;
      if (twist) {
        twist->vx = q * e.x();
        twist->vy = q * e.y();
        twist->omega = q * tau / c2;
      }
    }
    if (err == 0.0) break;
  }
  return state;
}

bool contact_from_measurement(const Point2& pusher_pos,
                              const Eigen::Vector2d& force,
                              double probe_radius, double force_threshold,
                              Point2* contact_point, Eigen::Vector2d* normal) {
  const double fn = force.norm();
  if (fn < force_threshold || fn <= 0.0) {
    if (contact_point) *contact_point = pusher_pos;
    if (normal) *normal = Eigen::Vector2d::Zero();
    return false;
  }
  const Eigen::Vector2d n = force / fn;
  if (normal) *normal = n;
  if (contact_point) *contact_point = pusher_pos - probe_radius * n;
  return true;
}

double c_ratio_for_disk(double radius) {
  if (radius <= 0.0) throw std::invalid_argument("disk radius must be positive");
  return 2.0 / 3.0 * radius;
}

double c_ratio_monte_carlo(const GroundTruthShape& shape, int samples) {
  if (samples <= 0) throw std::invalid_argument("sample count must be positive");
  const double ext = shape.max_extent();
  std::mt19937_64 rng(0x5eedc0de);
  std::uniform_real_distribution<double> uni(-ext, ext);
  double sum = 0.0;
  long long hits = 0;
  for (int i = 0; i < samples; ++i) {
    const Point2 p(uni(rng), uni(rng));
    if (shape.contains(p)) {
      sum += p.norm();
      ++hits;
    }
  }
  if (hits == 0) throw std::runtime_error("no interior samples");
  return sum / static_cast<double>(hits);
}

}  // namespace tslam
