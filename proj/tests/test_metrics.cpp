#include <doctest.h>

#include <cmath>
#include <random>

#include "tslam/metrics.hpp"

using namespace tslam;

namespace {

double directed_mean(const std::vector<Point2>& a,
                     const std::vector<Point2>& b) {
  double sum = 0.0;
  for (const Point2& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& q : b) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("modified hausdorff on tiny sets") {
  CHECK(modified_hausdorff({{0.0, 0.0}}, {{3.0, 4.0}}) == 5.0);

  // asymmetric direction means: max picks the worse one
  const std::vector<Point2> two{{0.0, 0.0}, {1.0, 0.0}};
  const std::vector<Point2> one{{0.0, 0.0}};
  CHECK(modified_hausdorff(two, one) == 0.5);
  CHECK(modified_hausdorff(one, two) == 0.5);

  CHECK(modified_hausdorff(two, two) == 0.0);
  CHECK_THROWS_AS(modified_hausdorff({}, one), std::invalid_argument);
  CHECK_THROWS_AS(modified_hausdorff(one, {}), std::invalid_argument);
}

TEST_CASE("modified hausdorff equals the quadratic-scan definition") {
  std::mt19937_64 rng(0xd157);
  std::normal_distribution<double> gauss(0.0, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> size(1, 40);
    std::vector<Point2> a(size(rng)), b(size(rng));
    for (Point2& p : a) p = {gauss(rng), gauss(rng)};
    for (Point2& p : b) p = {gauss(rng), gauss(rng)};
    const double expected =
        std::max(directed_mean(a, b), directed_mean(b, a));
    CHECK(modified_hausdorff(a, b) == expected);
  }
}

TEST_CASE("pose rmse") {
  const std::vector<Pose2> gt{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  const std::vector<Pose2> est{{0.003, 0.004, 0.1}, {1.0, 0.0, -0.1}};
  const PoseRmse r = pose_rmse(est, gt);
  CHECK(r.translation ==
        doctest::Approx(std::sqrt(0.005 * 0.005 / 2.0)).epsilon(1e-12));
  CHECK(r.rotation == doctest::Approx(0.1).epsilon(1e-12));

  CHECK_THROWS_AS(pose_rmse(est, {Pose2()}), std::invalid_argument);
  CHECK_THROWS_AS(pose_rmse({}, {}), std::invalid_argument);
}

TEST_CASE("pose rmse wraps rotation differences") {
  const PoseRmse r = pose_rmse({Pose2(1.0, 2.0, 3.1)}, {Pose2(1.0, 2.0, -3.1)});
  CHECK(r.translation == 0.0);
  // 6.2 rad apart on the line, 2*pi - 6.2 around the circle
  CHECK(r.rotation == doctest::Approx(0.08318530717958605).epsilon(1e-10));
}

TEST_CASE("shape error on sampled boundaries") {
  const GroundTruthShape square = GroundTruthShape::square(0.09);
  const std::vector<Point2> contour = square.sample_boundary(128);

  CHECK(shape_error_at(contour, Pose2(), square) < 1e-3);

  const double shifted =
      shape_error_at(contour, Pose2(0.01, 0.0, 0.0), square);
  CHECK(shifted > 4e-3);
  CHECK(shifted < 0.011);

  // a quarter turn leaves the square nearly invariant
  CHECK(shape_error_at(contour, Pose2(0.0, 0.0, M_PI / 2.0), square) < 1e-3);
}
