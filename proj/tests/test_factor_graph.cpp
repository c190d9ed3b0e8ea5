#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "tslam/factor_graph.hpp"
#include "tslam/simulator.hpp"

using namespace tslam;

namespace {

ContourPtr circle_contour(double radius, int segments = 360) {
  auto poly = std::make_shared<Contour>();
  poly->reserve(segments + 1);
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * M_PI * i / segments;
    poly->push_back(radius * Point2(std::cos(a), std::sin(a)));
  }
  poly->push_back(poly->front());
  return poly;
}

ContourPtr square_contour(double side) {
  const double h = side / 2.0;
  return std::make_shared<Contour>(
      Contour{{h, -h}, {h, h}, {-h, h}, {-h, -h}, {h, -h}});
}

TactileMeasurement contact_measurement(const Point2& pusher,
                                       const Eigen::Vector2d& force) {
  TactileMeasurement z;
  z.pusher_pos = pusher;
  z.force = force;
  z.contact = true;
  return z;
}

int count_kind(const FixedLagSmoother& s, FactorKind kind) {
  int n = 0;
  for (const auto& f : s.factors())
    if (f->kind() == kind) ++n;
  return n;
}

}  // namespace

TEST_CASE("factor kind names") {
  CHECK(std::string(factor_kind_name(FactorKind::kPush)) == "push");
  CHECK(std::string(factor_kind_name(FactorKind::kContact)) == "contact");
  CHECK(std::string(factor_kind_name(FactorKind::kNonPenetration)) ==
        "non_penetration");
  CHECK(std::string(factor_kind_name(FactorKind::kSmoothness)) == "smoothness");
  CHECK(std::string(factor_kind_name(FactorKind::kPosePrior)) == "pose_prior");
  CHECK(std::string(factor_kind_name(FactorKind::kCRatioPrior)) ==
        "c_ratio_prior");
  CHECK(std::string(factor_kind_name(FactorKind::kRelocPrior)) ==
        "reloc_prior");
  CHECK(std::string(factor_kind_name(FactorKind::kMarginalPrior)) ==
        "marginal_prior");
}

TEST_CASE("push residual against hand-worked values") {
  const TactileMeasurement z =
      contact_measurement({0.05, 0.01}, {0.8, 0.2});
  const PushFactor factor(0, 1, z, 0.00625, 1e-6, {1.0, 1.0});

  const Pose2 prev;
  const Pose2 cur = Pose2::exp({0.002, 0.001, 0.05});
  const Eigen::VectorXd r = factor.unwhitened({prev, cur}, 0.03);

  // lever arm: cross((0.05,0.01),(0.8,0.2)) = 0.002; the probe-radius
  // offset is parallel to the force, so it never shifts the torque
  REQUIRE(r.size() == 2);
  CHECK(r(0) == doctest::Approx(-0.016).epsilon(1e-9));
  CHECK(r(1) == doctest::Approx(-0.0035).epsilon(1e-9));
}

TEST_CASE("push residual vanishes exactly along the limit-surface twist") {
  std::mt19937_64 rng(0x5ca1e);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose2 prev(0.2 * uni(rng), 0.2 * uni(rng), M_PI * uni(rng));
    const Point2 pusher = prev.translation() + 0.06 * Point2(uni(rng), uni(rng));
    Eigen::Vector2d force(uni(rng), uni(rng));
    if (force.norm() < 0.1) force = {0.5, -0.3};
    const TactileMeasurement z = contact_measurement(pusher, force);
    const double c_ratio = 0.02 + 0.03 * std::abs(uni(rng));
    const PushFactor factor(0, 1, z, 0.00625, 1e-6, {1.0, 1.0});

    Point2 contact;
    contact_from_measurement(pusher, force, 0.00625, 0.0, &contact, nullptr);
    const double tau = cross2(contact - prev.translation(), force);
    const Eigen::Vector2d f_body = prev.rotate_to_body(force);
    const Eigen::Vector3d twist(c_ratio * c_ratio * f_body.x(),
                                c_ratio * c_ratio * f_body.y(), tau);

    const double scale = 0.5 * uni(rng);
    const Pose2 cur = prev.retract(scale * twist);
    const Eigen::VectorXd r = factor.unwhitened({prev, cur}, c_ratio);
    CHECK(r.norm() < 1e-12);

    // zero motion is always admissible: the factor carries no scale
    CHECK(factor.unwhitened({prev, prev}, c_ratio).norm() < 1e-11);

    // rotating more than the twist allows drags the residual along -C^2 f
    const double bump = 1e-3;
    const Pose2 off = prev.retract(scale * twist +
                                   Eigen::Vector3d(0.0, 0.0, bump));
    const Eigen::VectorXd r_off = factor.unwhitened({prev, off}, c_ratio);
    const double c2 = c_ratio * c_ratio;
    CHECK(r_off(0) == doctest::Approx(-c2 * f_body.x() * bump /
                                      std::abs(tau)).epsilon(1e-3));
    CHECK(r_off(1) == doctest::Approx(-c2 * f_body.y() * bump /
                                      std::abs(tau)).epsilon(1e-3));
  }
}

TEST_CASE("contact residual on a circular contour") {
  const double radius = 0.04;
  const double probe = 0.00625;
  ContourPtr contour = circle_contour(radius);

  SUBCASE("zero at a consistent configuration") {
    std::mt19937_64 rng(0xc0a7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const Pose2 pose(0.3 * uni(rng), 0.3 * uni(rng), M_PI * uni(rng));
      const double phi = M_PI * uni(rng);
      const Point2 n_obj(std::cos(phi), std::sin(phi));
      const Point2 c_world = pose.to_world(radius * n_obj);
      const Eigen::Vector2d n_world = pose.rotate_to_world(n_obj);
      const TactileMeasurement z = contact_measurement(
          c_world + probe * n_world, (1.0 + std::abs(uni(rng))) * n_world);

      const ContactFactor factor(0, z, contour, probe, {1.0, 1.0, 1.0});
      const Eigen::VectorXd r = factor.unwhitened({pose}, 0.0);
      REQUIRE(r.size() == 3);
      // a 360-gon shifts the projected point tangentially by up to
      // (distance to surface) * (half the edge angle) ~ probe * pi / 360
      CHECK(r.norm() < 1e-4);
    }
  }

  SUBCASE("translation offset shows up in world axes") {
    const Point2 c_world(radius, 0.0);
    const TactileMeasurement z =
        contact_measurement(c_world + Point2(probe, 0.0), {2.0, 0.0});
    const ContactFactor factor(0, z, contour, probe, {1.0, 1.0, 1.0});

    const Pose2 shifted(-0.001, 0.0, 0.0);
    const Eigen::VectorXd r = factor.unwhitened({shifted}, 0.0);
    CHECK(r(0) == doctest::Approx(-0.001).epsilon(1e-9));
    CHECK(std::abs(r(1)) < 1e-12);
    CHECK(r(2) == doctest::Approx(0.001).epsilon(1e-9));
  }

  SUBCASE("matches analytic circle projection away from the truth") {
    std::mt19937_64 rng(0x715e);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const Pose2 pose(0.1 * uni(rng), 0.1 * uni(rng), M_PI * uni(rng));
      const Point2 pusher(0.05 + 0.02 * uni(rng), 0.02 * uni(rng));
      Eigen::Vector2d force(1.0 + 0.3 * uni(rng), 0.3 * uni(rng));
      const TactileMeasurement z = contact_measurement(pusher, force);
      const ContactFactor factor(0, z, contour, probe, {1.0, 1.0, 1.0});
      const Eigen::VectorXd r = factor.unwhitened({pose}, 0.0);

      Point2 c_world;
      contact_from_measurement(pusher, force, probe, 0.0, &c_world, nullptr);
      const Point2 p_obj = pose.to_body(pusher);
      const Point2 proj = radius * p_obj.normalized();
      const Eigen::Vector2d expected_planar =
          pose.rotate_to_world(proj - pose.to_body(c_world));
      CHECK((r.head<2>() - expected_planar).norm() < 2e-3);
      CHECK(std::abs(r(2) - (std::abs(p_obj.norm() - radius) - probe)) < 1e-5);
    }
  }
}

TEST_CASE("non-penetration residual") {
  ContourPtr contour = square_contour(0.09);
  TactileMeasurement z;
  z.contact = false;

  SUBCASE("deepest probe sample sets the penalty") {
    z.pusher_pos = {0.043, 0.0};
    const NonPenetrationFactor factor(0, z, contour, 0.00625, 16, 1.0);
    const Eigen::VectorXd r = factor.unwhitened({Pose2()}, 0.0);
    REQUIRE(r.size() == 1);
    CHECK(r(0) == doctest::Approx(0.00825).epsilon(1e-9));
  }

  SUBCASE("zero outside") {
    z.pusher_pos = {0.06, 0.0};
    const NonPenetrationFactor factor(0, z, contour, 0.00625, 16, 1.0);
    CHECK(factor.unwhitened({Pose2()}, 0.0)(0) == 0.0);
  }

  SUBCASE("object pose moves the test into the body frame") {
    z.pusher_pos = {0.103, 0.0};
    const NonPenetrationFactor factor(0, z, contour, 0.00625, 16, 1.0);
    CHECK(factor.unwhitened({Pose2()}, 0.0)(0) == 0.0);
    CHECK(factor.unwhitened({Pose2(0.06, 0.0, 0.0)}, 0.0)(0) ==
          doctest::Approx(0.00825).epsilon(1e-9));
  }
}

TEST_CASE("kinematic and prior residual arithmetic") {
  const Pose2 prev(1.0, 2.0, 0.3);
  const Eigen::Vector3d delta(0.01, -0.02, 0.005);
  const Pose2 cur = prev.retract(delta);

  const SmoothnessFactor smooth(0, 1, {1.0, 1.0, 1.0});
  CHECK((smooth.unwhitened({prev, cur}, 0.0) - delta).norm() < 1e-14);

  const PosePriorFactor prior(0, prev, {1.0, 1.0, 1.0});
  CHECK((prior.unwhitened({cur}, 0.0) - delta).norm() < 1e-14);
  CHECK(prior.unwhitened({prev}, 0.0).norm() == 0.0);

  const CRatioPriorFactor ratio(0.03, 1.0);
  CHECK(ratio.unwhitened({}, 0.035)(0) == doctest::Approx(0.005));

  // whitening divides per dimension
  const PosePriorFactor tight(0, prev, {0.01, 0.02, 0.1});
  const Eigen::VectorXd w = tight.whitened({cur}, 0.0);
  CHECK(w(0) == doctest::Approx(delta(0) / 0.01));
  CHECK(w(1) == doctest::Approx(delta(1) / 0.02));
  CHECK(w(2) == doctest::Approx(delta(2) / 0.1));
}

TEST_CASE("marginal prior stacks local coordinates") {
  const Pose2 a(0.1, -0.2, 0.4);
  const Pose2 b(0.0, 0.3, -0.1);
  const double c0 = 0.03;
  const std::vector<VariableKey> keys{VariableKey::pose(0),
                                      VariableKey::pose(1),
                                      VariableKey::c_ratio()};

  const Eigen::Vector3d da(0.01, 0.02, -0.03);
  const Eigen::Vector3d db(-0.005, 0.0, 0.015);
  Eigen::VectorXd expected(7);
  expected << da, db, 0.002;

  const MarginalPriorFactor unit(keys, {a, b}, c0,
                                 Eigen::MatrixXd::Identity(7, 7),
                                 Eigen::VectorXd::Zero(7));
  const Eigen::VectorXd r =
      unit.unwhitened({a.retract(da), b.retract(db)}, c0 + 0.002);
  CHECK((r - expected).norm() < 1e-12);

  const MarginalPriorFactor doubled(keys, {a, b}, c0,
                                    2.0 * Eigen::MatrixXd::Identity(7, 7),
                                    Eigen::VectorXd::Zero(7));
  CHECK((doubled.unwhitened({a.retract(da), b.retract(db)}, c0 + 0.002) -
         2.0 * expected).norm() < 1e-12);

  // the stored offset shifts the zero
  const MarginalPriorFactor offset(keys, {a, b}, c0,
                                   Eigen::MatrixXd::Identity(7, 7), expected);
  CHECK(offset.unwhitened({a.retract(da), b.retract(db)}, c0 + 0.002).norm() <
        1e-12);
}

TEST_CASE("timestep factor roster") {
  GraphConfig config;
  FixedLagSmoother s(config);
  ContourPtr contour = circle_contour(0.04);

  TactileMeasurement touch =
      contact_measurement({0.04625, 0.0}, {1.0, 0.0});
  TactileMeasurement free;
  free.pusher_pos = {0.08, 0.0};
  free.contact = false;

  s.add_timestep(touch, contour);
  CHECK(s.window_size() == 1);
  CHECK(count_kind(s, FactorKind::kPosePrior) == 1);
  CHECK(count_kind(s, FactorKind::kCRatioPrior) == 1);
  CHECK(s.factors().size() == 2);

  s.add_timestep(touch, contour);
  CHECK(count_kind(s, FactorKind::kSmoothness) == 1);
  CHECK(count_kind(s, FactorKind::kPush) == 1);
  CHECK(count_kind(s, FactorKind::kContact) == 1);
  CHECK(s.factors().size() == 5);

  s.add_timestep(free, contour);
  CHECK(count_kind(s, FactorKind::kSmoothness) == 2);
  CHECK(count_kind(s, FactorKind::kPush) == 2);  // previous step touched
  CHECK(count_kind(s, FactorKind::kNonPenetration) == 1);
  CHECK(s.factors().size() == 8);

  s.add_timestep(free, contour, Pose2(0.001, 0.0, 0.0));
  CHECK(count_kind(s, FactorKind::kPush) == 2);  // previous step was free
  CHECK(count_kind(s, FactorKind::kRelocPrior) == 1);
  CHECK(s.factors().size() == 11);
}

TEST_CASE("priors alone converge to their information-weighted mean") {
  GraphConfig config;
  config.prior_mean = Pose2(0.0, 0.0, 0.0);
  FixedLagSmoother s(config);
  TactileMeasurement free;
  free.pusher_pos = {0.2, 0.0};
  free.contact = false;
  s.add_timestep(free, circle_contour(0.04));

  // second prior on x with a different mean: sigma 2mm at 0, 1mm at 4mm
  s.add_factor(std::make_shared<PosePriorFactor>(
      0, Pose2(0.004, 0.0, 0.0), Eigen::Vector3d(1e-3, 2e-3, 0.087)));

  const OptimizeDiagnostics diag = s.optimize();
  CHECK(diag.success);
  CHECK(s.pose(0).translation().x() == doctest::Approx(0.0032).epsilon(1e-6));
  CHECK(std::abs(s.pose(0).translation().y()) < 1e-9);
  CHECK(std::abs(s.pose(0).theta()) < 1e-9);
  CHECK(s.c_ratio() == doctest::Approx(config.c_ratio_init));
}

TEST_CASE("optimize is deterministic") {
  TrialConfig tc;
  tc.steps = 40;
  tc.seed = 12;
  const TrialLog log = run_trial(tc);
  ContourPtr contour = square_contour(0.09);

  auto run = [&] {
    FixedLagSmoother s{GraphConfig{}};
    for (const TrialStep& step : log.steps) {
      s.add_timestep(step.z, contour, step.reloc);
      s.optimize();
      s.marginalize();
    }
    return s;
  };
  const FixedLagSmoother a = run();
  const FixedLagSmoother b = run();
  CHECK(a.latest_pose().translation() == b.latest_pose().translation());
  CHECK(a.latest_pose().theta() == b.latest_pose().theta());
  CHECK(a.c_ratio() == b.c_ratio());
}

TEST_CASE("pose gauge appears as exactly three near-null directions") {
  TrialConfig tc;
  tc.steps = 30;
  tc.seed = 4;
  tc.noise_pos_std = 0.0;
  tc.noise_force_std = 0.0;
  const TrialLog log = run_trial(tc);
  ContourPtr contour = square_contour(0.09);

  auto tiny_eigenvalue_count = [&](const GraphConfig& config) {
    FixedLagSmoother s(config);
    for (const TrialStep& step : log.steps) {
      // strip the measurements: keep only smoothness + push structure
      TactileMeasurement z = step.z;
      z.pusher_pos += Eigen::Vector2d(10.0, 10.0);  // far from the contour
      z.contact = false;
      s.add_timestep(z, contour);
    }
    const Eigen::VectorXd ev =
        s.linearized_hessian().selfadjointView<Eigen::Lower>().eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    return (ev.array() < 1e-9 * scale).count();
  };

  GraphConfig loose;
  loose.sigma_prior = Eigen::Vector3d(1e9, 1e9, 1e9);
  CHECK(tiny_eigenvalue_count(loose) == 3);

  GraphConfig anchored;
  CHECK(tiny_eigenvalue_count(anchored) == 0);
}

TEST_CASE("smoother with the true contour tracks a noise-free trial") {
  TrialConfig tc;
  tc.steps = 250;
  tc.noise_pos_std = 0.0;
  tc.noise_force_std = 0.0;
  tc.perturbation = Eigen::Vector3d::Zero();
  tc.seed = 7;
  const TrialLog log = run_trial(tc);
  ContourPtr contour = square_contour(0.09);

  GraphConfig config;
  config.c_ratio_init = log.true_c_ratio;
  FixedLagSmoother s(config);
  for (const TrialStep& step : log.steps) {
    s.add_timestep(step.z, contour, step.reloc);
    const OptimizeDiagnostics diag = s.optimize();
    CHECK(diag.success);
    s.marginalize();

    const Pose2 err = step.gt.between(s.pose(step.t));
    CHECK(err.translation().norm() < 2e-4);
    CHECK(std::abs(err.theta()) < 2e-3);
  }
}

TEST_CASE("short lag agrees with the full batch") {
  TrialConfig tc;
  tc.steps = 60;
  tc.seed = 21;
  const TrialLog log = run_trial(tc);
  ContourPtr contour = square_contour(0.09);

  GraphConfig lagged;
  lagged.lag = 30;
  GraphConfig batch;
  batch.lag = 1000000;

  auto run = [&](const GraphConfig& config) {
    FixedLagSmoother s(config);
    for (const TrialStep& step : log.steps) {
      s.add_timestep(step.z, contour, step.reloc);
      s.optimize();
      s.marginalize();
    }
    return s;
  };

  const FixedLagSmoother a = run(lagged);
  const FixedLagSmoother b = run(batch);
  CHECK(a.window_size() == 30);
  CHECK(b.window_size() == 60);
  for (int t = a.oldest_timestep(); t <= a.latest_timestep(); ++t) {
    const Pose2 diff = b.pose(t).between(a.pose(t));
    CHECK(diff.translation().norm() < 5e-4);
    CHECK(std::abs(diff.theta()) < 5e-3);
  }
  CHECK(count_kind(a, FactorKind::kMarginalPrior) == 1);
}

TEST_CASE("window never exceeds the lag") {
  GraphConfig config;
  config.lag = 5;
  FixedLagSmoother s(config);
  TactileMeasurement free;
  free.pusher_pos = {0.2, 0.0};
  free.contact = false;
  ContourPtr contour = circle_contour(0.04);
  for (int t = 0; t < 12; ++t) {
    s.add_timestep(free, contour);
    s.optimize();
    s.marginalize();
    CHECK(s.window_size() <= 5);
    CHECK(s.latest_timestep() == t);
  }
  CHECK(s.oldest_timestep() == 7);
  CHECK_FALSE(s.has_pose(6));
  CHECK(s.has_pose(7));
}
