#include "tslam/simulator.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <tuple>

namespace tslam {

namespace {

constexpr double kStartGap = 3e-3;     // initial clearance beyond touching
constexpr double kStabilizeGain = 1.0; // per-step penetration correction
constexpr double kContactSlack = 2e-4; // preload depth kept while touching

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

void validate(const TrialConfig& c) {
  if (c.steps < 1) throw std::invalid_argument("trial steps must be >= 1");
  if (c.speed <= 0.0) throw std::invalid_argument("pusher speed must be > 0");
  if (c.dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (c.probe_radius <= 0.0)
    throw std::invalid_argument("probe radius must be > 0");
  if (c.fingers != 1 && c.fingers != 2)
    throw std::invalid_argument("pusher has one or two fingers");
  if (c.noise_pos_std < 0.0 || c.noise_force_std < 0.0)
    throw std::invalid_argument("noise std must be >= 0");
  if (c.reloc_count < 0)
    throw std::invalid_argument("reloc count must be >= 0");
}

struct FingerContact {
  int index = 0;
  Eigen::Vector2d force = Eigen::Vector2d::Zero();  // on object, body frame
  Point2 implied_contact = Point2::Zero();          // body frame
  double implied_torque = 0.0;
  Point2 true_contact = Point2::Zero();
  Eigen::Vector2d true_normal = Eigen::Vector2d::Zero();
  double gap = 0.0;  // signed clearance, negative while pressed
};

}  // namespace

Eigen::Vector2d contour_follow_command(const Point2&,
                                       const Eigen::Vector2d& sensed_normal,
                                       double speed, double inward_gain) {
  const Eigen::Vector2d dir = perp(sensed_normal) - inward_gain * sensed_normal;
  return speed * dir.normalized();
}

double shape_c_ratio(const GroundTruthShape& shape) {
  using Key = std::tuple<int, double, double, std::size_t>;
  static std::map<Key, double> cache;
  static std::mutex mutex;
  const Key key{static_cast<int>(shape.kind()), shape.max_extent(),
                shape.perimeter(), shape.vertices().size()};
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, c_ratio_monte_carlo(shape, 2'000'000)).first;
  return it->second;
}

PushSimulator::PushSimulator(const TrialConfig& config)
    : config_(config),
      noise_rng_(make_stream(config.seed, 2)),
      jitter_rng_(make_stream(config.seed, 4)) {
  validate(config_);
  c_ratio_ = config_.c_ratio_override > 0.0 ? config_.c_ratio_override
                                            : shape_c_ratio(config_.shape);

  auto init_rng = make_stream(config_.seed, 1);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double px = uni(init_rng) * config_.perturbation.x();
  const double py = uni(init_rng) * config_.perturbation.y();
  const double pt = uni(init_rng) * config_.perturbation.z();
  object_pose_ = Pose2(px, py, pt);

  const auto [anchor, normal] = config_.shape.closest_boundary_point(
      Point2(-4.0 * config_.shape.max_extent(), 0.0));
  rig_ = object_pose_.to_world(anchor +
                               (config_.probe_radius + kStartGap) * normal);
  sensed_normal_ = object_pose_.rotate_to_world(normal);
  travel_dir_ = -sensed_normal_;

  for (int i = 0; i < config_.fingers; ++i) {
    const Point2 body = object_pose_.to_body(finger_position(i));
    if (config_.shape.signed_distance(body) < config_.probe_radius)
      throw std::runtime_error("pusher starts inside the object");
  }
}

Point2 PushSimulator::finger_position(int index) const {
  if (index == 0) return rig_;
  return rig_ - config_.finger_spacing * perp(travel_dir_);
}

Eigen::Vector2d PushSimulator::follow_command() const {
  if (!ever_contacted_) return config_.speed * -sensed_normal_;
  // While separated the bias ramps up and the remembered normal sweeps in the
  // travel direction, arcing the path back onto the surface; this is what
  // carries the probe around convex corners.
  const double gain =
      config_.follow_gain *
      std::min(1.0 + static_cast<double>(separated_steps_), 10.0);
  return contour_follow_command(rig_, sensed_normal_, config_.speed, gain);
}

TrialStep PushSimulator::step(const Eigen::Vector2d& command) {
  rig_ += command * config_.dt;
  if (command.norm() > 1e-12) travel_dir_ = command.normalized();

  const PushParams params{c_ratio_, config_.mu, config_.probe_radius};
  std::vector<FingerContact> contacts;
  for (int i = 0; i < config_.fingers; ++i) {
    const Point2 body = object_pose_.to_body(finger_position(i));
    const double gap = config_.shape.signed_distance(body) - config_.probe_radius;
    if (gap > 0.0) continue;

    const auto [c_true, n_true] = config_.shape.closest_boundary_point(body);
    const Eigen::Vector2d v_push = object_pose_.rotate_to_body(command);
    const ContactState state = resolve_push(v_push, c_true, n_true, params);
    if (state.mode == ContactMode::kSeparated) continue;

    FingerContact fc;
    fc.index = i;
    fc.force = state.force;
    fc.implied_contact = body + config_.probe_radius * state.force.normalized();
    fc.implied_torque = cross2(fc.implied_contact, fc.force);
    fc.true_contact = c_true;
    fc.true_normal = n_true;
    fc.gap = gap;
    contacts.push_back(fc);
  }

  Eigen::Vector3d twist = Eigen::Vector3d::Zero();
  std::size_t dominant = 0;
  Eigen::Vector2d f_sum = Eigen::Vector2d::Zero();  // on object, body frame
  double tau_sum = 0.0;
  if (!contacts.empty()) {
    for (std::size_t i = 1; i < contacts.size(); ++i)
      if (contacts[i].force.norm() > contacts[dominant].force.norm())
        dominant = i;
    for (const FingerContact& fc : contacts) {
      f_sum += fc.force;
      tau_sum += fc.implied_torque;
    }

    Eigen::Vector2d f_dir = f_sum;
    double tau_dir = tau_sum;
    const double surface =
        std::sqrt(f_sum.squaredNorm() + tau_sum * tau_sum / (c_ratio_ * c_ratio_));
    if (surface > 1e-12) {
      f_dir /= surface;
      tau_dir /= surface;
    }

    const Eigen::Vector2d u_v = c_ratio_ * c_ratio_ * f_dir;
    const FingerContact& dom = contacts[dominant];
    const double closing =
        dom.true_normal.dot(u_v + tau_dir * perp(dom.true_contact));
    // The object yields only as much as restores the contact preload, so it
    // can never outrun the feed and lift off within a step.
    const double target =
        kStabilizeGain * (dom.gap + kContactSlack) / config_.dt;
    if (std::abs(closing) > 1e-12 && target < 0.0) {
      const double scale = std::max(target / closing, 0.0);
      twist = scale * Eigen::Vector3d(u_v.x(), u_v.y(), tau_dir);
    }
    if (config_.twist_jitter > 0.0) {
      std::normal_distribution<double> jn(0.0, 1.0);
      for (int k = 0; k < 3; ++k)
        twist(k) *= 1.0 + config_.twist_jitter * jn(jitter_rng_);
    }
  }

  TrialStep out;
  out.t = t_;
  out.gt = object_pose_;
  out.z.pusher_pos =
      finger_position(contacts.empty() ? 0 : contacts[dominant].index);
  out.z.force = Eigen::Vector2d::Zero();
  if (!contacts.empty() && f_sum.norm() > 1e-12) {
    // Reduce the summed wrench to a single contact on its line of action
    // (the point nearest the dominant finger's touch point) and report the
    // probe center that a non-penetrating probe would have there, so the
    // emitted (p, f) pair implies exactly the wrench that moves the object
    // and the contact point it implies lies on the true surface.
    const Eigen::Vector2d f_hat = f_sum.normalized();
    const Point2 axis = -(tau_sum / f_sum.squaredNorm()) * perp(f_sum);
    const Point2 c_eq =
        axis + (contacts[dominant].true_contact - axis).dot(f_hat) * f_hat;
    out.z.pusher_pos =
        object_pose_.to_world(c_eq - config_.probe_radius * f_hat);
    const Eigen::Vector2d reaction = -object_pose_.rotate_to_world(f_sum);
    out.z.force = reaction;
    sensed_normal_ = reaction.normalized();
    ever_contacted_ = true;
    separated_steps_ = 0;
  } else if (ever_contacted_) {
    ++separated_steps_;
    // Sweep the remembered normal clockwise (the follower's travel sense), so
    // the search arc actually wraps around a lost convex corner.
    sensed_normal_ = Eigen::Rotation2Dd(-kSearchTurnRate) * sensed_normal_;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  out.z.pusher_pos.x() += config_.noise_pos_std * gauss(noise_rng_);
  out.z.pusher_pos.y() += config_.noise_pos_std * gauss(noise_rng_);
  out.z.force.x() += config_.noise_force_std * gauss(noise_rng_);
  out.z.force.y() += config_.noise_force_std * gauss(noise_rng_);
  out.z.contact = out.z.force.norm() >= config_.contact_threshold;

  object_pose_ = object_pose_.compose(Pose2::exp(config_.dt * twist));
  ++t_;
  return out;
}

TrialLog run_trial(const TrialConfig& config) {
  validate(config);
  PushSimulator sim(config);
  auto reloc_rng = make_stream(config.seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::set<int> reloc_at;
  for (int i = 1; i <= config.reloc_count; ++i) {
    const int t = static_cast<int>(
        std::llround(static_cast<double>(i) * config.steps /
                     (config.reloc_count + 1)));
    reloc_at.insert(std::min(t, config.steps - 1));
  }

  TrialLog log;
  log.config = config;
  log.true_c_ratio = sim.true_c_ratio();
  log.steps.reserve(config.steps);
  for (int t = 0; t < config.steps; ++t) {
    TrialStep st = sim.step(sim.follow_command());
    if (reloc_at.count(t))
      st.reloc = Pose2(st.gt.x() + config.reloc_noise.x() * gauss(reloc_rng),
                       st.gt.y() + config.reloc_noise.y() * gauss(reloc_rng),
                       st.gt.theta() + config.reloc_noise.z() * gauss(reloc_rng));
    log.steps.push_back(std::move(st));
  }
  return log;
}

}  // namespace tslam
