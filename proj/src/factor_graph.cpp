#include "tslam/factor_graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

namespace tslam {

const char* factor_kind_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::kPush: return "push";
    case FactorKind::kContact: return "contact";
    case FactorKind::kNonPenetration: return "non_penetration";
    case FactorKind::kSmoothness: return "smoothness";
    case FactorKind::kPosePrior: return "pose_prior";
    case FactorKind::kCRatioPrior: return "c_ratio_prior";
    case FactorKind::kRelocPrior: return "reloc_prior";
    case FactorKind::kMarginalPrior: return "marginal_prior";
  }
  return "unknown";
}

PushFactor::PushFactor(int t_prev, int t_cur, const TactileMeasurement& z_prev,
                       double probe_radius, double eps_tau,
                       const Eigen::Vector2d& sigmas)
    : Factor(FactorKind::kPush,
             {VariableKey::pose(t_prev), VariableKey::pose(t_cur),
              VariableKey::c_ratio()},
             sigmas),
      z_(z_prev),
      probe_radius_(probe_radius),
      eps_tau_(eps_tau) {}

Eigen::VectorXd PushFactor::unwhitened(const std::vector<Pose2>& poses,
                                       double c_ratio) const {
  const Pose2& prev = poses[0];
  const Eigen::Vector3d xi = prev.local(poses[1]);

  Point2 contact;
  contact_from_measurement(z_.pusher_pos, z_.force, probe_radius_, 0.0,
                           &contact, nullptr);
  const double tau = cross2(contact - prev.translation(), z_.force);
  const Eigen::Vector2d f_body = prev.rotate_to_body(z_.force);
  const double c2 = c_ratio * c_ratio;
  const double denom = std::max(std::abs(tau), eps_tau_);

  Eigen::VectorXd r(2);
  r(0) = (xi.x() * tau - c2 * f_body.x() * xi.z()) / denom;
  r(1) = (xi.y() * tau - c2 * f_body.y() * xi.z()) / denom;
  return r;
}

ContactFactor::ContactFactor(int t, const TactileMeasurement& z,
                             ContourPtr contour, double probe_radius,
                             const Eigen::Vector3d& sigmas)
    : Factor(FactorKind::kContact, {VariableKey::pose(t)}, sigmas),
      z_(z),
      contour_(std::move(contour)),
      probe_radius_(probe_radius) {}

Eigen::VectorXd ContactFactor::unwhitened(const std::vector<Pose2>& poses,
                                          double) const {
  const Pose2& pose = poses[0];
  Point2 contact_world;
  contact_from_measurement(z_.pusher_pos, z_.force, probe_radius_, 0.0,
                           &contact_world, nullptr);
  const Point2 p_obj = pose.to_body(z_.pusher_pos);
  const Point2 c_obj = pose.to_body(contact_world);
  const PolylineProjection proj = project_to_polyline(*contour_, p_obj);

  Eigen::VectorXd r(3);
  r.head<2>() = pose.rotate_to_world(proj.point - c_obj);
  r(2) = (proj.point - p_obj).norm() - probe_radius_;
  return r;
}

NonPenetrationFactor::NonPenetrationFactor(int t, const TactileMeasurement& z,
                                           ContourPtr contour,
                                           double probe_radius,
                                           int boundary_samples, double sigma)
    : Factor(FactorKind::kNonPenetration, {VariableKey::pose(t)},
             Eigen::VectorXd::Constant(1, sigma)),
      z_(z),
      contour_(std::move(contour)),
      probe_radius_(probe_radius),
      samples_(boundary_samples) {}

Eigen::VectorXd NonPenetrationFactor::unwhitened(const std::vector<Pose2>& poses,
                                                 double) const {
  const Pose2& pose = poses[0];
  double deepest = 0.0;
  for (int k = 0; k < samples_; ++k) {
    const double a = 2.0 * M_PI * k / samples_;
    const Point2 sample =
        z_.pusher_pos + probe_radius_ * Point2(std::cos(a), std::sin(a));
    const double sd = polyline_signed_distance(*contour_, pose.to_body(sample));
    deepest = std::min(deepest, sd);
  }
  Eigen::VectorXd r(1);
  r(0) = -deepest;  // penetration depth of the deepest probe sample, else 0
  return r;
}

SmoothnessFactor::SmoothnessFactor(int t_prev, int t_cur,
                                   const Eigen::Vector3d& sigmas)
    : Factor(FactorKind::kSmoothness,
             {VariableKey::pose(t_prev), VariableKey::pose(t_cur)}, sigmas) {}

Eigen::VectorXd SmoothnessFactor::unwhitened(const std::vector<Pose2>& poses,
                                             double) const {
  return poses[0].local(poses[1]);
}

PosePriorFactor::PosePriorFactor(int t, const Pose2& mean,
                                 const Eigen::Vector3d& sigmas, FactorKind kind)
    : Factor(kind, {VariableKey::pose(t)}, sigmas), mean_(mean) {}

Eigen::VectorXd PosePriorFactor::unwhitened(const std::vector<Pose2>& poses,
                                            double) const {
  return mean_.local(poses[0]);
}

CRatioPriorFactor::CRatioPriorFactor(double mean, double sigma)
    : Factor(FactorKind::kCRatioPrior, {VariableKey::c_ratio()},
             Eigen::VectorXd::Constant(1, sigma)),
      mean_(mean) {}

Eigen::VectorXd CRatioPriorFactor::unwhitened(const std::vector<Pose2>&,
                                              double c_ratio) const {
  Eigen::VectorXd r(1);
  r(0) = c_ratio - mean_;
  return r;
}

MarginalPriorFactor::MarginalPriorFactor(std::vector<VariableKey> keys,
                                         std::vector<Pose2> pose_linearization,
                                         double c_linearization,
                                         Eigen::MatrixXd sqrt_info,
                                         Eigen::VectorXd delta0)
    : Factor(FactorKind::kMarginalPrior, std::move(keys),
             Eigen::VectorXd::Ones(sqrt_info.rows())),
      lin_poses_(std::move(pose_linearization)),
      lin_c_(c_linearization),
      sqrt_info_(std::move(sqrt_info)),
      delta0_(std::move(delta0)) {}

Eigen::VectorXd MarginalPriorFactor::unwhitened(const std::vector<Pose2>& poses,
                                                double c_ratio) const {
  Eigen::VectorXd delta(sqrt_info_.cols());
  int at = 0;
  size_t pose_idx = 0;
  for (const VariableKey& key : keys_) {
    if (key.kind == VariableKey::Kind::kPose) {
      delta.segment<3>(at) = lin_poses_[pose_idx].local(poses[pose_idx]);
      ++pose_idx;
      at += 3;
    } else {
      delta(at++) = c_ratio - lin_c_;
    }
  }
  return sqrt_info_ * (delta - delta0_);
}

FixedLagSmoother::FixedLagSmoother(const GraphConfig& config)
    : config_(config), c_ratio_(config.c_ratio_init) {
  if (config_.lag < 2) throw std::invalid_argument("lag must be >= 2");
}

void FixedLagSmoother::add_factor(std::shared_ptr<Factor> factor) {
  factors_.push_back(std::move(factor));
}

void FixedLagSmoother::add_timestep(const TactileMeasurement& z,
                                    ContourPtr contour,
                                    const std::optional<Pose2>& reloc) {
  const int t = next_timestep_++;
  if (t == 0) {
    poses_[0] = config_.prior_mean;
    c_ratio_ = config_.c_ratio_init;
    add_factor(std::make_shared<PosePriorFactor>(0, config_.prior_mean,
                                                 config_.sigma_prior));
    add_factor(std::make_shared<CRatioPriorFactor>(config_.c_ratio_init,
                                                   config_.sigma_c_ratio));
  } else {
    poses_[t] = poses_.at(t - 1);
    add_factor(std::make_shared<SmoothnessFactor>(t - 1, t, config_.sigma_smooth));
    if (have_prev_z_ && prev_z_.contact)
      add_factor(std::make_shared<PushFactor>(t - 1, t, prev_z_,
                                              config_.probe_radius,
                                              config_.eps_tau,
                                              config_.sigma_push));
    if (z.contact)
      add_factor(std::make_shared<ContactFactor>(t, z, contour,
                                                 config_.probe_radius,
                                                 config_.sigma_contact));
    else
      add_factor(std::make_shared<NonPenetrationFactor>(
          t, z, contour, config_.probe_radius, config_.nonpen_samples,
          config_.sigma_nonpen));
  }
  if (reloc)
    add_factor(std::make_shared<PosePriorFactor>(t, *reloc, config_.sigma_reloc,
                                                 FactorKind::kRelocPrior));
  prev_z_ = z;
  have_prev_z_ = true;
}

FixedLagSmoother::DofLayout FixedLagSmoother::layout() const {
  DofLayout lay;
  for (const auto& [t, pose] : poses_) {
    lay.offset[VariableKey::pose(t)] = lay.total;
    lay.total += 3;
  }
  lay.offset[VariableKey::c_ratio()] = lay.total;
  lay.total += 1;
  return lay;
}

Eigen::VectorXd FixedLagSmoother::factor_whitened(const Factor& f,
                                                  const PoseMap& poses,
                                                  double c_ratio) const {
  std::vector<Pose2> vals;
  vals.reserve(f.keys().size());
  for (const VariableKey& key : f.keys())
    if (key.kind == VariableKey::Kind::kPose) vals.push_back(poses.at(key.t));
  return f.whitened(vals, c_ratio);
}

double FixedLagSmoother::cost_of(const PoseMap& poses, double c_ratio,
                                 std::map<std::string, double>* by_kind) const {
  double total = 0.0;
  for (const auto& f : factors_) {
    const double c = factor_whitened(*f, poses, c_ratio).squaredNorm();
    total += c;
    if (by_kind) (*by_kind)[factor_kind_name(f->kind())] += c;
  }
  return total;
}

double FixedLagSmoother::total_cost() const { return cost_of(poses_, c_ratio_); }

void FixedLagSmoother::linearize_factor(
    const Factor& f, const PoseMap& poses, double c_ratio,
    Eigen::VectorXd* residual, std::vector<Eigen::MatrixXd>* jacobians) const {
  std::vector<Pose2> vals;
  vals.reserve(f.keys().size());
  for (const VariableKey& key : f.keys())
    if (key.kind == VariableKey::Kind::kPose) vals.push_back(poses.at(key.t));

  *residual = f.whitened(vals, c_ratio);
  jacobians->clear();
  const double h = config_.fd_step;
  size_t pose_idx = 0;
  for (const VariableKey& key : f.keys()) {
    Eigen::MatrixXd jac(residual->size(), key.dim());
    if (key.kind == VariableKey::Kind::kPose) {
      const Pose2 saved = vals[pose_idx];
      for (int d = 0; d < 3; ++d) {
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        delta(d) = h;
        vals[pose_idx] = saved.retract(delta);
        const Eigen::VectorXd rp = f.whitened(vals, c_ratio);
        delta(d) = -h;
        vals[pose_idx] = saved.retract(delta);
        const Eigen::VectorXd rm = f.whitened(vals, c_ratio);
        jac.col(d) = (rp - rm) / (2.0 * h);
      }
      vals[pose_idx] = saved;
      ++pose_idx;
    } else {
      const Eigen::VectorXd rp = f.whitened(vals, c_ratio + h);
      const Eigen::VectorXd rm = f.whitened(vals, c_ratio - h);
      jac.col(0) = (rp - rm) / (2.0 * h);
    }
    jacobians->push_back(std::move(jac));
  }
}

void FixedLagSmoother::accumulate(const Factor& f, const DofLayout& lay,
                                  const PoseMap& poses, double c_ratio,
                                  Eigen::MatrixXd* h, Eigen::VectorXd* g) const {
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  linearize_factor(f, poses, c_ratio, &r, &jacs);
  const auto& keys = f.keys();
  for (size_t a = 0; a < keys.size(); ++a) {
    const int oa = lay.offset.at(keys[a]);
    const int da = keys[a].dim();
    g->segment(oa, da) += jacs[a].transpose() * r;
    for (size_t b = 0; b < keys.size(); ++b) {
      const int ob = lay.offset.at(keys[b]);
      const int db = keys[b].dim();
      h->block(oa, ob, da, db) += jacs[a].transpose() * jacs[b];
    }
  }
}

Eigen::MatrixXd FixedLagSmoother::linearized_hessian() const {
  const DofLayout lay = layout();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(lay.total, lay.total);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.total);
  for (const auto& f : factors_) accumulate(*f, lay, poses_, c_ratio_, &h, &g);
  return h;
}

OptimizeDiagnostics FixedLagSmoother::optimize() {
  const auto t_start = std::chrono::steady_clock::now();
  OptimizeDiagnostics diag;
  const DofLayout lay = layout();

  double cost = cost_of(poses_, c_ratio_);
  diag.initial_cost = cost;
  double lambda = 1e-8;

  for (int it = 0; it < config_.max_iterations; ++it) {
    diag.iterations = it + 1;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(lay.total, lay.total);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.total);
    for (const auto& f : factors_) accumulate(*f, lay, poses_, c_ratio_, &h, &g);

    bool accepted = false;
    double rel_decrease = 0.0;
    while (lambda <= 1e8) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = llt.solve(-g);

      PoseMap trial = poses_;
      for (auto& [t, pose] : trial)
        pose = pose.retract(delta.segment<3>(lay.offset.at(VariableKey::pose(t))));
      const double trial_c =
          c_ratio_ + delta(lay.offset.at(VariableKey::c_ratio()));
      const double trial_cost = cost_of(trial, trial_c);

      if (trial_cost <= cost * (1.0 + 1e-12)) {
        poses_ = std::move(trial);
        c_ratio_ = trial_c;
        rel_decrease = (cost - trial_cost) / std::max(cost, 1e-300);
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }

    if (!accepted) {
      // damping exhausted; report failure only if nothing ever improved
      diag.success = it > 0 || diag.initial_cost == 0.0;
      break;
    }
    if (rel_decrease < config_.relative_decrease_tol) break;
  }

  diag.final_cost = cost_of(poses_, c_ratio_, &diag.cost_by_kind);
  diag.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t_start)
                     .count();
  return diag;
}

void FixedLagSmoother::marginalize() {
  while (window_size() > config_.lag) {
    const int t_old = oldest_timestep();
    const VariableKey old_key = VariableKey::pose(t_old);

    std::vector<std::shared_ptr<Factor>> touching, keep;
    for (const auto& f : factors_) {
      const auto& keys = f->keys();
      if (std::find(keys.begin(), keys.end(), old_key) != keys.end())
        touching.push_back(f);
      else
        keep.push_back(f);
    }

    std::set<VariableKey> boundary_set;
    for (const auto& f : touching)
      for (const VariableKey& key : f->keys())
        if (!(key == old_key)) boundary_set.insert(key);

    if (!boundary_set.empty()) {
      // local layout: marginalized pose first, boundary following
      DofLayout lay;
      lay.offset[old_key] = 0;
      lay.total = 3;
      std::vector<VariableKey> boundary(boundary_set.begin(), boundary_set.end());
      for (const VariableKey& key : boundary) {
        lay.offset[key] = lay.total;
        lay.total += key.dim();
      }

      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(lay.total, lay.total);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.total);
      for (const auto& f : touching)
        accumulate(*f, lay, poses_, c_ratio_, &h, &g);

      const int nb = lay.total - 3;
      Eigen::Matrix3d h_mm = h.topLeftCorner(3, 3);
      h_mm.diagonal().array() += 1e-12 * std::max(1.0, h_mm.trace());
      const Eigen::Matrix3d h_mm_inv = h_mm.inverse();
      const Eigen::MatrixXd h_bm = h.bottomLeftCorner(nb, 3);
      const Eigen::MatrixXd h_prime =
          h.bottomRightCorner(nb, nb) - h_bm * h_mm_inv * h_bm.transpose();
      const Eigen::VectorXd g_prime =
          g.tail(nb) - h_bm * h_mm_inv * g.head(3);

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
          0.5 * (h_prime + h_prime.transpose()));
      const double clamp = 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
      Eigen::VectorXd lam = eig.eigenvalues();
      Eigen::VectorXd lam_sqrt(nb), lam_inv(nb);
      for (int i = 0; i < nb; ++i) {
        lam_sqrt(i) = lam(i) > clamp ? std::sqrt(lam(i)) : 0.0;
        lam_inv(i) = lam(i) > clamp ? 1.0 / lam(i) : 0.0;
      }
      const Eigen::MatrixXd sqrt_info =
          lam_sqrt.asDiagonal() * eig.eigenvectors().transpose();
      const Eigen::VectorXd delta0 = -(eig.eigenvectors() *
                                       lam_inv.asDiagonal() *
                                       eig.eigenvectors().transpose() * g_prime);

      std::vector<Pose2> lin_poses;
      for (const VariableKey& key : boundary)
        if (key.kind == VariableKey::Kind::kPose)
          lin_poses.push_back(poses_.at(key.t));
      keep.push_back(std::make_shared<MarginalPriorFactor>(
          boundary, std::move(lin_poses), c_ratio_, sqrt_info, delta0));
    }

    factors_ = std::move(keep);
    poses_.erase(t_old);
  }
}

}  // namespace tslam
