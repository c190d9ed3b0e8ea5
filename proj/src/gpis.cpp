#include "tslam/gpis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace tslam {

double thin_plate_value(double rho, double r) {
  if (r <= 0.0) throw std::invalid_argument("kernel scale must be positive");
  return 2.0 * rho * rho * rho - 3.0 * r * rho * rho + r * r * r;
}

Eigen::Matrix3d thin_plate_block(const Point2& a, const Point2& b, double r) {
  if (r <= 0.0) throw std::invalid_argument("kernel scale must be positive");
  const Eigen::Vector2d u = a - b;
  const double rho = u.norm();
  const double g = 6.0 * (rho - r);  // k'(rho)/rho, finite everywhere

  Eigen::Matrix3d k;
  k(0, 0) = thin_plate_value(rho, r);
  k.block<1, 2>(0, 1) = -g * u.transpose();
  k.block<2, 1>(1, 0) = g * u;
  if (rho < 1e-14) {
    k.block<2, 2>(1, 1) = 6.0 * r * Eigen::Matrix2d::Identity();
  } else {
    k.block<2, 2>(1, 1) =
        -g * Eigen::Matrix2d::Identity() - (6.0 / rho) * (u * u.transpose());
  }
  return k;
}

LocalGp::LocalGp(const Point2& origin, double radius, const GpisConfig* config)
    : origin_(origin), radius_(radius), config_(config) {}

Eigen::Vector3d LocalGp::noise_diagonal() const {
  const double grad_jitter = 1e-8 * config_->prior_variance();
  return Eigen::Vector3d(config_->noise_variance_sdf,
                         config_->noise_variance_grad + grad_jitter,
                         config_->noise_variance_grad + grad_jitter);
}

void LocalGp::add(const SurfaceObservation& obs) {
  const int n = count();
  const int rows = 3 * n;
  const double r = config_->kernel_scale_r;

  Eigen::Matrix3d d = thin_plate_block(obs.point, obs.point, r);
  d += noise_diagonal().asDiagonal();

  if (n == 0) {
    chol_ = Eigen::LLT<Eigen::Matrix3d>(d).matrixL();
    targets_.resize(3);
  } else {
    Eigen::MatrixXd b(rows, 3);
    for (int i = 0; i < n; ++i)
      b.block<3, 3>(3 * i, 0) =
          thin_plate_block(observations_[i].point, obs.point, r);
    const Eigen::MatrixXd c =
        chol_.triangularView<Eigen::Lower>().solve(b);
    const Eigen::Matrix3d s = d - c.transpose() * c;
    Eigen::LLT<Eigen::Matrix3d> llt(s);
    Eigen::Matrix3d ls;
    if (llt.info() == Eigen::Success) {
      ls = llt.matrixL();
    } else {
      Eigen::Matrix3d bumped =
          s + 1e-10 * std::max(1.0, s.trace()) * Eigen::Matrix3d::Identity();
      ls = Eigen::LLT<Eigen::Matrix3d>(bumped).matrixL();
    }
    chol_.conservativeResize(rows + 3, rows + 3);
    chol_.topRightCorner(rows, 3).setZero();
    chol_.bottomLeftCorner(3, rows) = c.transpose();
    chol_.bottomRightCorner(3, 3) = ls;
    targets_.conservativeResize(rows + 3);
  }
  targets_.segment<3>(rows) =
      Eigen::Vector3d(obs.sdf, obs.normal.x(), obs.normal.y());
  observations_.push_back(obs);
  alpha_dirty_ = true;
}

GpisQuery LocalGp::predict(const Point2& p) const {
  GpisQuery out;
  const double r = config_->kernel_scale_r;
  const int n = count();
  if (n == 0) {
    out.variance = config_->prior_variance();
    return out;
  }
  if (alpha_dirty_) {
    alpha_ = chol_.triangularView<Eigen::Lower>().solve(targets_);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
    alpha_dirty_ = false;
  }
  Eigen::MatrixXd kstar(3 * n, 3);
  for (int i = 0; i < n; ++i)
    kstar.block<3, 3>(3 * i, 0) = thin_plate_block(observations_[i].point, p, r);
  const Eigen::Vector3d mean = kstar.transpose() * alpha_;
  const Eigen::VectorXd v =
      chol_.triangularView<Eigen::Lower>().solve(kstar.col(0));
  out.sdf = mean(0);
  out.gradient = mean.tail<2>();
  out.variance = config_->prior_variance() - v.squaredNorm();
  return out;
}

GpisModel::GpisModel(const GpisConfig& config) : config_(config) {
  if (config_.kernel_scale_r <= 0.0)
    throw std::invalid_argument("kernel scale must be positive");
  if (config_.local_gp_grid < 1)
    throw std::invalid_argument("local gp lattice must be >= 1");
  if (config_.grid_resolution <= 0.0)
    throw std::invalid_argument("grid resolution must be positive");

  const double half = config_.half_extent();
  const int l = config_.local_gp_grid;
  const double spacing = 2.0 * half / l;
  const double radius = config_.local_radius_factor * spacing;
  for (int iy = 0; iy < l; ++iy)
    for (int ix = 0; ix < l; ++ix)
      locals_.emplace_back(
          Point2(-half + spacing * (ix + 0.5), -half + spacing * (iy + 0.5)),
          radius, &config_);

  grid_n_ = static_cast<int>(std::floor(2.0 * half / config_.grid_resolution)) + 1;
  grid_origin_ = -half;
  const int total = grid_n_ * grid_n_;
  grid_mean_.assign(total, 0.0);
  grid_var_.assign(total, config_.prior_variance());
  stale_.assign(total, 1);
  node_cover_.resize(total);
  local_nodes_.resize(locals_.size());
  for (int iy = 0; iy < grid_n_; ++iy)
    for (int ix = 0; ix < grid_n_; ++ix) {
      const int node = iy * grid_n_ + ix;
      const Point2 p = grid_node_position(ix, iy);
      for (size_t li = 0; li < locals_.size(); ++li)
        if (locals_[li].contains(p)) {
          node_cover_[node].push_back(static_cast<int>(li));
          local_nodes_[li].push_back(node);
        }
    }

  // circular shape prior: evenly spaced boundary points, radial normals
  for (int k = 0; k < config_.prior_point_count; ++k) {
    const double a = 2.0 * M_PI * k / config_.prior_point_count;
    SurfaceObservation obs;
    obs.normal = Eigen::Vector2d(std::cos(a), std::sin(a));
    obs.point = config_.prior_circle_radius * obs.normal;
    obs.sdf = 0.0;
    insert_unconditional(obs);
  }
  refresh_grid();
}

Point2 GpisModel::grid_node_position(int ix, int iy) const {
  return Point2(grid_origin_ + ix * config_.grid_resolution,
                grid_origin_ + iy * config_.grid_resolution);
}

std::vector<int> GpisModel::covering(const Point2& p) const {
  std::vector<int> out;
  for (size_t i = 0; i < locals_.size(); ++i)
    if (locals_[i].contains(p)) out.push_back(static_cast<int>(i));
  return out;
}

void GpisModel::mark_stale(const std::vector<int>& local_indices) {
  for (int li : local_indices)
    for (int node : local_nodes_[li]) stale_[node] = 1;
}

void GpisModel::insert_unconditional(const SurfaceObservation& obs) {
  const std::vector<int> cover = covering(obs.point);
  if (cover.empty())
    throw std::domain_error("observation outside every local GP domain");
  for (int li : cover) locals_[li].add(obs);
  mark_stale(cover);
  ++accepted_count_;
}

void GpisModel::seed(const std::vector<SurfaceObservation>& observations) {
  for (const SurfaceObservation& obs : observations) insert_unconditional(obs);
  refresh_grid();
}

bool GpisModel::add_observation(const SurfaceObservation& obs) {
  const GpisQuery q = query(obs.point);  // throws when out of domain
  if (q.variance <= config_.variance_threshold * config_.prior_variance())
    return false;
  insert_unconditional(obs);
  return true;
}

GpisQuery GpisModel::query(const Point2& p) const {
  const std::vector<int> cover = covering(p);
  if (cover.empty())
    throw std::domain_error("query point outside every local GP domain");
  GpisQuery out;
  for (int li : cover) {
    const GpisQuery q = locals_[li].predict(p);
    out.sdf += q.sdf;
    out.gradient += q.gradient;
    out.variance += q.variance;
  }
  const double inv = 1.0 / static_cast<double>(cover.size());
  out.sdf *= inv;
  out.gradient *= inv;
  out.variance *= inv;
  return out;
}

int GpisModel::refresh_grid() {
  int refreshed = 0;
  for (int iy = 0; iy < grid_n_; ++iy)
    for (int ix = 0; ix < grid_n_; ++ix) {
      const int node = iy * grid_n_ + ix;
      if (!stale_[node]) continue;
      if (node_cover_[node].empty()) {
        grid_mean_[node] = 0.0;
        grid_var_[node] = config_.prior_variance();
      } else {
        const GpisQuery q = query(grid_node_position(ix, iy));
        grid_mean_[node] = q.sdf;
        grid_var_[node] = q.variance;
      }
      stale_[node] = 0;
      ++refreshed;
    }
  return refreshed;
}

namespace {

struct LoopBuilder {
  // edge ids: horizontal edge (i,j) spans nodes (i,j)-(i+1,j);
  // vertical edge (i,j) spans (i,j)-(i,j+1)
  int n = 0;
  int horiz(int i, int j) const { return j * n + i; }
  int vert(int i, int j) const { return n * n + j * n + i; }
};

}  // namespace

std::vector<Point2> GpisModel::extract_contour() const {
  const int n = grid_n_;
  auto value = [&](int i, int j) {
    const double v = grid_mean_[j * n + i];
    return v == 0.0 ? -1e-300 : v;  // nudge exact zeros inside
  };

  LoopBuilder ids{n};
  std::map<int, Point2> edge_points;
  std::multimap<int, int> adjacency;

  auto edge_point = [&](int id, int i0, int j0, int i1, int j1) {
    if (edge_points.count(id)) return;
    const double va = value(i0, j0), vb = value(i1, j1);
    const double t = va / (va - vb);
    const Point2 a = grid_node_position(i0, j0);
    const Point2 b = grid_node_position(i1, j1);
    edge_points[id] = a + t * (b - a);
  };
  auto add_segment = [&](int e0, int e1) {
    adjacency.emplace(e0, e1);
    adjacency.emplace(e1, e0);
  };

  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const bool b0 = value(i, j) < 0.0;
      const bool b1 = value(i + 1, j) < 0.0;
      const bool b2 = value(i + 1, j + 1) < 0.0;
      const bool b3 = value(i, j + 1) < 0.0;
      const int code = (b0 ? 1 : 0) | (b1 ? 2 : 0) | (b2 ? 4 : 0) | (b3 ? 8 : 0);
      if (code == 0 || code == 15) continue;

      const int e_bottom = ids.horiz(i, j);
      const int e_top = ids.horiz(i, j + 1);
      const int e_left = ids.vert(i, j);
      const int e_right = ids.vert(i + 1, j);
      auto bottom = [&] { edge_point(e_bottom, i, j, i + 1, j); };
      auto top = [&] { edge_point(e_top, i, j + 1, i + 1, j + 1); };
      auto left = [&] { edge_point(e_left, i, j, i, j + 1); };
      auto right = [&] { edge_point(e_right, i + 1, j, i + 1, j + 1); };

      switch (code) {
        case 1: case 14: left(); bottom(); add_segment(e_left, e_bottom); break;
        case 2: case 13: bottom(); right(); add_segment(e_bottom, e_right); break;
        case 3: case 12: left(); right(); add_segment(e_left, e_right); break;
        case 4: case 11: right(); top(); add_segment(e_right, e_top); break;
        case 6: case 9: bottom(); top(); add_segment(e_bottom, e_top); break;
        case 7: case 8: left(); top(); add_segment(e_left, e_top); break;
        case 5: case 10: {
          left(); right(); top(); bottom();
          const double center = 0.25 * (value(i, j) + value(i + 1, j) +
                                        value(i + 1, j + 1) + value(i, j + 1));
          const bool band = center < 0.0;
          if ((code == 5) == band) {
            add_segment(e_left, e_top);
            add_segment(e_bottom, e_right);
          } else {
            add_segment(e_left, e_bottom);
            add_segment(e_right, e_top);
          }
          break;
        }
        default: break;
      }
    }

  if (adjacency.empty()) throw EmptyContourError();

  // trace loops, consuming both directions of each segment as it is walked
  std::vector<std::vector<Point2>> loops;
  auto take_next = [&](int from) -> int {
    auto it = adjacency.find(from);
    if (it == adjacency.end()) return -1;
    const int to = it->second;
    adjacency.erase(it);
    auto back = adjacency.equal_range(to);
    for (auto bit = back.first; bit != back.second; ++bit)
      if (bit->second == from) {
        adjacency.erase(bit);
        break;
      }
    return to;
  };

  while (!adjacency.empty()) {
    const int start = adjacency.begin()->first;
    std::vector<int> chain{start};
    int cur = start;
    while (true) {
      const int next = take_next(cur);
      if (next < 0) break;
      chain.push_back(next);
      cur = next;
      if (next == start) break;
    }
    if (chain.size() >= 4 && chain.front() == chain.back()) {
      std::vector<Point2> loop;
      loop.reserve(chain.size());
      for (int id : chain) loop.push_back(edge_points.at(id));
      loops.push_back(std::move(loop));
    }
  }

  if (loops.empty()) throw EmptyContourError();
  size_t best = 0;
  double best_area = -1.0;
  for (size_t i = 0; i < loops.size(); ++i) {
    const double a = std::abs(polygon_signed_area(loops[i]));
    if (a > best_area) {
      best_area = a;
      best = i;
    }
  }
  std::vector<Point2> out = std::move(loops[best]);
  if (polygon_signed_area(out) < 0.0) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace tslam
