#include "tslam/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace tslam {

TactileSlam::TactileSlam(const SlamConfig& config)
    : config_(config), gpis_(config.gpis), smoother_(config.graph) {
  if (config_.gpis_update_period < 1 || config_.contour_update_period < 1)
    throw std::invalid_argument("update periods must be >= 1");
  contour_ = std::make_shared<const Contour>(gpis_.extract_contour());
  contour_history_.push_back({-1, contour_version_, contour_});
}

TactileSlam::~TactileSlam() {
  if (pending_.valid()) pending_.wait();
}

void TactileSlam::seed_shape(const std::vector<SurfaceObservation>& surface) {
  if (step_ != 0)
    throw std::logic_error("seed_shape must precede the first measurement");
  gpis_.seed(surface);
  contour_ = std::make_shared<const Contour>(gpis_.extract_contour());
  ++contour_version_;
  contour_history_.push_back({-1, contour_version_, contour_});
}

TactileSlam::ShapeJobOutcome TactileSlam::run_shape_job(ShapeJob job) {
  ShapeJobOutcome out;
  out.t = job.t;
  if (job.insertion) {
    try {
      job.insertion->accepted = gpis_.add_observation(job.insertion->observation);
    } catch (const std::domain_error&) {
      job.insertion->accepted = false;  // outside the model's support
    }
    out.insertion = std::move(job.insertion);
  }
  if (job.extract) {
    gpis_.refresh_grid();
    try {
      out.contour = std::make_shared<const Contour>(gpis_.extract_contour());
    } catch (const EmptyContourError&) {
      out.contour = nullptr;  // keep the previous snapshot
    }
  }
  return out;
}

void TactileSlam::apply(ShapeJobOutcome outcome) {
  if (outcome.insertion) {
    if (!outcome.insertion->accepted) ++dropped_;
    insertions_.push_back(std::move(*outcome.insertion));
  }
  if (outcome.contour) {
    contour_ = std::move(outcome.contour);
    ++contour_version_;
    contour_history_.push_back({outcome.t, contour_version_, contour_});
  }
}

void TactileSlam::apply_pending() {
  if (pending_.valid()) apply(pending_.get());
}

void TactileSlam::finish() { apply_pending(); }

const GpisModel& TactileSlam::gpis() {
  finish();
  return gpis_;
}

ContourPtr TactileSlam::contour() {
  finish();
  return contour_;
}

int TactileSlam::contour_version() {
  finish();
  return contour_version_;
}

const std::vector<InsertionRecord>& TactileSlam::insertions() {
  finish();
  return insertions_;
}

const std::vector<ContourRecord>& TactileSlam::contour_history() {
  finish();
  return contour_history_;
}

int TactileSlam::dropped_observations() {
  finish();
  return dropped_;
}

StepResult TactileSlam::process_measurement(const TactileMeasurement& z,
                                            const std::optional<Pose2>& reloc) {
  const auto t_start = std::chrono::steady_clock::now();
  apply_pending();

  const int t = step_++;
  StepResult result;
  result.contour = contour_;
  result.contour_version = contour_version_;

  smoother_.add_timestep(z, contour_, reloc);
  result.diagnostics = smoother_.optimize();
  result.solver_ok = result.diagnostics.success;
  if (!result.solver_ok) ++solver_failures_;
  smoother_.marginalize();
  result.pose = smoother_.latest_pose();

  ShapeJob job;
  job.t = t;
  if (z.contact && result.solver_ok && t % config_.gpis_update_period == 0) {
    Point2 contact_world;
    Eigen::Vector2d normal_world;
    contact_from_measurement(z.pusher_pos, z.force, config_.graph.probe_radius,
                             0.0, &contact_world, &normal_world);
    InsertionRecord rec;
    rec.t = t;
    rec.world_point = contact_world;
    rec.pose_used = result.pose;
    rec.observation.point = result.pose.to_body(contact_world);
    rec.observation.normal = result.pose.rotate_to_body(normal_world);
    rec.observation.sdf = 0.0;
    job.insertion = rec;
  }
  job.extract = t % config_.contour_update_period == 0;

  if (job.insertion || job.extract) {
    if (config_.two_worker) {
      pending_ = std::async(std::launch::async,
                            [this, job = std::move(job)]() mutable {
                              return run_shape_job(std::move(job));
                            });
    } else {
      apply(run_shape_job(std::move(job)));
    }
  }

  result.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  return result;
}

RunResult run_slam(const TrialLog& log, const SlamConfig& config) {
  if (log.steps.empty()) throw std::invalid_argument("trial log has no steps");

  TactileSlam slam(config);
  RunResult out;
  out.steps.reserve(log.steps.size());

  std::vector<Pose2> est, gt;
  est.reserve(log.steps.size());
  gt.reserve(log.steps.size());
  for (const TrialStep& step : log.steps) {
    StepResult r = slam.process_measurement(step.z, step.reloc);
    est.push_back(r.pose);
    gt.push_back(step.gt);
    out.report.timing_ms.push_back(r.wall_ms);
    out.steps.push_back(std::move(r));
  }
  slam.finish();

  const PoseRmse rmse = pose_rmse(est, gt);
  out.report.trans_rmse = rmse.translation;
  out.report.rot_rmse = rmse.rotation;

  out.contours = slam.contour_history();
  for (const ContourRecord& rec : out.contours) {
    if (rec.t < 0) continue;  // pre-data prior snapshot
    const Pose2 alignment = gt[rec.t].between(est[rec.t]);
    out.report.mhd_series.push_back(
        shape_error_at(*rec.contour, alignment, log.config.shape));
  }
  if (!out.report.mhd_series.empty())
    out.report.final_mhd = out.report.mhd_series.back();
  else
    out.report.final_mhd = shape_error_at(*out.contours.front().contour,
                                          gt.back().between(est.back()),
                                          log.config.shape);
  return out;
}

}  // namespace tslam
