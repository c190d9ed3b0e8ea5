#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <vector>

#include "tslam/geometry.hpp"

namespace tslam {

struct GpisConfig {
  double kernel_scale_r = 0.15;      // m; must cover the scene diameter
  double noise_variance_sdf = 1e-6;  // m^2, on distance observations
  double noise_variance_grad = 0.01; // on unit-normal components
  double prior_circle_radius = 0.04; // m
  int prior_point_count = 16;
  double variance_threshold = 5e-4;  // fraction of the prior variance k(0)
  double grid_resolution = 0.005;    // m
  double grid_half_extent = 0.0;     // m; 0 derives 2 * prior_circle_radius
  int local_gp_grid = 5;             // lattice dimension (5 -> 25 local models)
  double local_radius_factor = 1.5;  // domain radius / lattice spacing

  double half_extent() const {
    return grid_half_extent > 0.0 ? grid_half_extent : 2.0 * prior_circle_radius;
  }
  double prior_variance() const {
    return kernel_scale_r * kernel_scale_r * kernel_scale_r;
  }
};

struct SurfaceObservation {
  Point2 point = Point2::Zero();               // object frame
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  double sdf = 0.0;
};

struct GpisQuery {
  double sdf = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  double variance = 0.0;
};

class EmptyContourError : public std::runtime_error {
 public:
  EmptyContourError() : std::runtime_error("no zero crossing in the sdf grid") {}
};

/// Thin-plate covariance k(rho) = 2 rho^3 - 3 R rho^2 + R^3, valid for
/// rho <= R.
double thin_plate_value(double rho, double kernel_scale_r);

/// 3x3 covariance block between (value, d/dx, d/dy) at `a` and at `b`.
Eigen::Matrix3d thin_plate_block(const Point2& a, const Point2& b,
                                 double kernel_scale_r);

/// GP over SDF value + gradient observations restricted to a disk domain.
/// The noise-augmented Gram factor is extended in place as rows arrive.
class LocalGp {
 public:
  LocalGp(const Point2& origin, double radius, const GpisConfig* config);

  bool contains(const Point2& p) const {
    return (p - origin_).norm() <= radius_;
  }
  void add(const SurfaceObservation& obs);
  GpisQuery predict(const Point2& p) const;

  int count() const { return static_cast<int>(observations_.size()); }
  const Point2& origin() const { return origin_; }
  double radius() const { return radius_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_; }
  const std::vector<SurfaceObservation>& observations() const {
    return observations_;
  }
  /// Per-observation noise variances added to the Gram diagonal.
  Eigen::Vector3d noise_diagonal() const;

 private:
  Point2 origin_;
  double radius_;
  const GpisConfig* config_;
  std::vector<SurfaceObservation> observations_;
  Eigen::MatrixXd chol_;      // lower-triangular, 3n x 3n
  Eigen::VectorXd targets_;   // stacked (sdf, nx, ny)
  mutable Eigen::VectorXd alpha_;
  mutable bool alpha_dirty_ = true;
};

/// Partitioned GPIS over a lattice of overlapping local GPs with a cached
/// prediction grid and marching-squares contour extraction.
class GpisModel {
 public:
  explicit GpisModel(const GpisConfig& config);

  /// Subset-of-data insertion: accepted only where the model is still
  /// uncertain (predictive variance above the configured threshold).
  bool add_observation(const SurfaceObservation& obs);

  /// Batch insertion that bypasses the subset-of-data test, for starting
  /// from already-known boundary geometry.
  void seed(const std::vector<SurfaceObservation>& observations);

  /// Averaged prediction over every local GP whose domain covers p.
  GpisQuery query(const Point2& p) const;

  /// Recomputes cells invalidated since the last refresh; returns the count.
  int refresh_grid();

  /// Zero-level contour of the cached sdf grid: largest closed loop,
  /// counterclockwise, first vertex repeated at the end.
  std::vector<Point2> extract_contour() const;

  const GpisConfig& config() const { return config_; }
  const std::vector<LocalGp>& locals() const { return locals_; }
  int observation_count() const { return accepted_count_; }

  int grid_nodes_per_side() const { return grid_n_; }
  Point2 grid_node_position(int ix, int iy) const;
  double grid_sdf(int ix, int iy) const { return grid_mean_[iy * grid_n_ + ix]; }
  double grid_variance(int ix, int iy) const {
    return grid_var_[iy * grid_n_ + ix];
  }

 private:
  void insert_unconditional(const SurfaceObservation& obs);
  void mark_stale(const std::vector<int>& local_indices);
  std::vector<int> covering(const Point2& p) const;

  GpisConfig config_;
  std::vector<LocalGp> locals_;
  std::vector<std::vector<int>> node_cover_;  // local indices per grid node
  std::vector<std::vector<int>> local_nodes_; // grid nodes per local
  std::vector<double> grid_mean_;
  std::vector<double> grid_var_;
  std::vector<char> stale_;
  int grid_n_ = 0;
  double grid_origin_ = 0.0;
  int accepted_count_ = 0;
};

}  // namespace tslam
