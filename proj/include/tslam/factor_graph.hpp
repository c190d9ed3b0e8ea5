#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tslam/dynamics.hpp"
#include "tslam/geometry.hpp"

namespace tslam {

using Contour = std::vector<Point2>;
using ContourPtr = std::shared_ptr<const Contour>;

enum class FactorKind {
  kPush,          // quasi-static motion model between consecutive poses
  kContact,       // measured contact consistent with the shape contour
  kNonPenetration,
  kSmoothness,    // weak zero-motion bias between consecutive poses
  kPosePrior,
  kCRatioPrior,
  kRelocPrior,
  kMarginalPrior,
};

const char* factor_kind_name(FactorKind kind);

struct VariableKey {
  enum class Kind { kPose, kCRatio };
  Kind kind = Kind::kPose;
  int t = 0;

  static VariableKey pose(int t) { return {Kind::kPose, t}; }
  static VariableKey c_ratio() { return {Kind::kCRatio, 0}; }
  int dim() const { return kind == Kind::kPose ? 3 : 1; }
  bool operator==(const VariableKey& o) const {
    return kind == o.kind && t == o.t;
  }
  bool operator<(const VariableKey& o) const {
    if (kind != o.kind) return kind < o.kind;  // poses order before c
    return t < o.t;
  }
};

/// Residual block over a small set of variables. `unwhitened` receives the
/// pose values for this factor's pose keys (in key order); the scalar ratio
/// variable is passed alongside. Whitening divides by per-dimension sigmas.
class Factor {
 public:
  Factor(FactorKind kind, std::vector<VariableKey> keys, Eigen::VectorXd sigmas)
      : kind_(kind), keys_(std::move(keys)), sigmas_(std::move(sigmas)) {}
  virtual ~Factor() = default;

  FactorKind kind() const { return kind_; }
  const std::vector<VariableKey>& keys() const { return keys_; }
  int dim() const { return static_cast<int>(sigmas_.size()); }

  virtual Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                                     double c_ratio) const = 0;
  virtual Eigen::VectorXd whitened(const std::vector<Pose2>& poses,
                                   double c_ratio) const {
    return unwhitened(poses, c_ratio).cwiseQuotient(sigmas_);
  }

 protected:
  FactorKind kind_;
  std::vector<VariableKey> keys_;
  Eigen::VectorXd sigmas_;
};

/// Cross-multiplied limit-surface consistency of the twist between two poses
/// with the wrench recovered from the previous measurement.
class PushFactor : public Factor {
 public:
  PushFactor(int t_prev, int t_cur, const TactileMeasurement& z_prev,
             double probe_radius, double eps_tau, const Eigen::Vector2d& sigmas);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;

 private:
  TactileMeasurement z_;
  double probe_radius_;
  double eps_tau_;
};

class ContactFactor : public Factor {
 public:
  ContactFactor(int t, const TactileMeasurement& z, ContourPtr contour,
                double probe_radius, const Eigen::Vector3d& sigmas);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;
  const ContourPtr& contour() const { return contour_; }

 private:
  TactileMeasurement z_;
  ContourPtr contour_;
  double probe_radius_;
};

class NonPenetrationFactor : public Factor {
 public:
  NonPenetrationFactor(int t, const TactileMeasurement& z, ContourPtr contour,
                       double probe_radius, int boundary_samples, double sigma);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;

 private:
  TactileMeasurement z_;
  ContourPtr contour_;
  double probe_radius_;
  int samples_;
};

class SmoothnessFactor : public Factor {
 public:
  SmoothnessFactor(int t_prev, int t_cur, const Eigen::Vector3d& sigmas);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;
};

class PosePriorFactor : public Factor {
 public:
  PosePriorFactor(int t, const Pose2& mean, const Eigen::Vector3d& sigmas,
                  FactorKind kind = FactorKind::kPosePrior);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;

 private:
  Pose2 mean_;
};

class CRatioPriorFactor : public Factor {
 public:
  CRatioPriorFactor(double mean, double sigma);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;

 private:
  double mean_;
};

/// Dense Gaussian prior left behind by marginalization, anchored at the
/// linearization point current when it was formed.
class MarginalPriorFactor : public Factor {
 public:
  MarginalPriorFactor(std::vector<VariableKey> keys,
                      std::vector<Pose2> pose_linearization, double c_linearization,
                      Eigen::MatrixXd sqrt_info, Eigen::VectorXd delta0);
  Eigen::VectorXd unwhitened(const std::vector<Pose2>& poses,
                             double c_ratio) const override;
  const Eigen::MatrixXd& sqrt_info() const { return sqrt_info_; }

 private:
  std::vector<Pose2> lin_poses_;
  double lin_c_;
  Eigen::MatrixXd sqrt_info_;
  Eigen::VectorXd delta0_;
};

struct GraphConfig {
  Eigen::Vector2d sigma_push{1e-3, 1e-3};
  Eigen::Vector3d sigma_contact{2e-3, 2e-3, 2e-3};
  double sigma_nonpen = 1e-3;
  Eigen::Vector3d sigma_smooth{5e-3, 5e-3, 0.05};
  Eigen::Vector3d sigma_prior{2e-3, 2e-3, 0.087};
  double sigma_c_ratio = 0.01;
  Eigen::Vector3d sigma_reloc{1e-3, 1e-3, 0.01};

  Pose2 prior_mean{};
  double c_ratio_init = 2.0 / 3.0 * 0.04;
  double probe_radius = 0.00625;
  double eps_tau = 1e-6;
  int nonpen_samples = 16;

  int lag = 100;  // maximum pose count kept in the window
  int max_iterations = 25;
  double relative_decrease_tol = 1e-9;
  double fd_step = 1e-6;
};

struct OptimizeDiagnostics {
  bool success = true;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double wall_ms = 0.0;
  std::map<std::string, double> cost_by_kind;
};

/// Sliding-window MAP estimator over poses and the scalar push ratio.
class FixedLagSmoother {
 public:
  explicit FixedLagSmoother(const GraphConfig& config);

  /// Appends pose x_t, the measurement factors for z_t, the push factor fed
  /// by z_{t-1} when that step was in contact, and an optional
  /// relocalization prior. The first call installs the pose and ratio priors.
  void add_timestep(const TactileMeasurement& z, ContourPtr contour,
                    const std::optional<Pose2>& reloc = std::nullopt);

  OptimizeDiagnostics optimize();

  /// Schur-marginalizes oldest poses until the window is within the lag.
  void marginalize();

  int window_size() const { return static_cast<int>(poses_.size()); }
  int latest_timestep() const { return next_timestep_ - 1; }
  int oldest_timestep() const { return poses_.begin()->first; }
  bool has_pose(int t) const { return poses_.count(t) > 0; }
  Pose2 pose(int t) const { return poses_.at(t); }
  Pose2 latest_pose() const { return poses_.rbegin()->second; }
  double c_ratio() const { return c_ratio_; }
  const GraphConfig& config() const { return config_; }

  const std::vector<std::shared_ptr<Factor>>& factors() const {
    return factors_;
  }
  void add_factor(std::shared_ptr<Factor> factor);

  double total_cost() const;
  /// Gauss-Newton information matrix at the current estimate (test hook).
  Eigen::MatrixXd linearized_hessian() const;

 private:
  using PoseMap = std::map<int, Pose2>;

  struct DofLayout {
    std::map<VariableKey, int> offset;
    int total = 0;
  };

  DofLayout layout() const;
  double cost_of(const PoseMap& poses, double c_ratio,
                 std::map<std::string, double>* by_kind = nullptr) const;
  Eigen::VectorXd factor_whitened(const Factor& f, const PoseMap& poses,
                                  double c_ratio) const;
  void linearize_factor(const Factor& f, const PoseMap& poses, double c_ratio,
                        Eigen::VectorXd* residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const;
  void accumulate(const Factor& f, const DofLayout& lay, const PoseMap& poses,
                  double c_ratio, Eigen::MatrixXd* h, Eigen::VectorXd* g) const;

  GraphConfig config_;
  PoseMap poses_;
  double c_ratio_ = 0.0;
  std::vector<std::shared_ptr<Factor>> factors_;
  TactileMeasurement prev_z_;
  bool have_prev_z_ = false;
  int next_timestep_ = 0;
};

}  // namespace tslam
