#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/harness.hpp"
#include "trackbench/keypoints_io.hpp"

using namespace trackbench;
using testing::exact_keypoints;
using testing::normalized;
using testing::random_offset_homography;

namespace {

KeypointPair kp(double cx, double cy, double tx, double ty) {
  return {CameraPoint(cx, cy), TwinPoint(tx, ty), std::nullopt};
}

double max_abs_diff(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Homography translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography::from_matrix(m);
}

}  // namespace

TEST_CASE("points reject non-finite coordinates") {
  CHECK_THROWS_AS(CameraPoint(std::nan(""), 0.0), Error);
  CHECK_THROWS_AS(TwinPoint(0.0, INFINITY), Error);
  CHECK(distance(TwinPoint(0, 0), TwinPoint(3, 4)) == doctest::Approx(5.0));
}

TEST_CASE("keypoint set validates bounds and duplicates") {
  KeypointSet set({100, 100}, {50, 50});
  set.add(kp(10, 10, 5, 5));
  SUBCASE("out of bounds camera point") {
    try {
      set.add(kp(-5, 10, 5, 5));
      FAIL("expected OutOfBounds");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::OutOfBounds);
    }
  }
  SUBCASE("out of bounds twin point") {
    CHECK_THROWS_AS(set.add(kp(20, 20, 60, 5)), Error);
  }
  SUBCASE("duplicate camera point") {
    try {
      set.add(kp(10, 10, 7, 7));
      FAIL("expected DuplicateCameraPoint");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DuplicateCameraPoint);
    }
  }
  SUBCASE("remove out of range") {
    try {
      set.remove(99);
      FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IndexOutOfRange);
    }
  }
}

TEST_CASE("unit square to itself gives the normalized identity") {
  const std::vector<KeypointPair> pairs{kp(0, 0, 0, 0), kp(1, 0, 1, 0), kp(1, 1, 1, 1), kp(0, 1, 0, 1)};
  const auto h = estimate_homography(pairs);
  CHECK(max_abs_diff(h.matrix(), Eigen::Matrix3d::Identity() / std::sqrt(3.0)) < 1e-12);
  CHECK(h.matrix().norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("known scale and translation is recovered from six pairs") {
  Eigen::Matrix3d known;
  known << 2, 0, 5, 0, 2, 7, 0, 0, 1;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<KeypointPair> pairs;
  for (int i = 0; i < 6; ++i) {
    const double x = u(rng), y = u(rng);
    pairs.push_back(kp(x, y, 2 * x + 5, 2 * y + 7));
  }
  CHECK(max_abs_diff(estimate_homography(pairs).matrix(), normalized(known)) < 1e-9);
}

TEST_CASE("estimation errors") {
  SUBCASE("three pairs") {
    const std::vector<KeypointPair> pairs{kp(0, 0, 0, 0), kp(1, 0, 1, 0), kp(1, 1, 1, 1)};
    try {
      estimate_homography(pairs);
      FAIL("expected TooFewPoints");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TooFewPoints);
    }
  }
  SUBCASE("three collinear camera points among four") {
    const std::vector<KeypointPair> pairs{kp(0, 0, 0, 0), kp(1, 1, 1, 0), kp(2, 2, 1, 1), kp(0, 5, 0, 1)};
    try {
      estimate_homography(pairs);
      FAIL("expected DegenerateConfiguration");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateConfiguration);
    }
  }
  SUBCASE("all points on one line") {
    std::vector<KeypointPair> pairs;
    for (int i = 0; i < 6; ++i) pairs.push_back(kp(i, 2 * i, i, i));
    CHECK_THROWS_AS(estimate_homography(pairs), Error);
  }
}

TEST_CASE("apply homography") {
  CHECK(apply_homography(Homography::identity(), CameraPoint(10, 20)) == TwinPoint(10, 20));
  const TwinPoint t = apply_homography(translation(5, 7), CameraPoint(0, 0));
  CHECK(t.x() == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(t.y() == doctest::Approx(7.0).epsilon(1e-14));

  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 0) = 1.0;
  m(2, 2) = -10.0;
  const auto h = Homography::from_matrix(m);
  try {
    apply_homography(h, CameraPoint(10, 3));
    FAIL("expected PointAtInfinity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PointAtInfinity);
  }
}

TEST_CASE("singular matrix is rejected") {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = 1.0;
  CHECK_THROWS_AS(Homography::from_matrix(m), Error);
}

TEST_CASE("pinhole pose maps ground points back to the twin frame") {
  const sim::CameraPose pose;
  const auto h = sim::camera_to_twin(pose);
  const Eigen::Matrix3d fwd = sim::plane_homography(pose);
  for (auto [x, y] : {std::pair{320.0, 240.0}, {100.0, 100.0}, {500.0, 400.0}, {250.0, 60.0}}) {
    const CameraPoint c = sim::project_to_camera(fwd, TwinPoint(x, y));
    const TwinPoint back = apply_homography(h, c);
    CHECK(std::abs(back.x() - x) < 1e-6);
    CHECK(std::abs(back.y() - y) < 1e-6);
  }
}

TEST_CASE("reprojection diagnostics") {
  SUBCASE("3-4-5 triangle") {
    const std::vector<KeypointPair> pairs{kp(0, 0, 3, 4)};
    const auto d = reprojection_diagnostics(Homography::identity(), pairs);
    REQUIRE(d.per_point_errors.size() == 1);
    CHECK(d.per_point_errors[0] == doctest::Approx(5.0));
    CHECK(d.average_error == doctest::Approx(5.0));
    CHECK(d.accumulated_error == doctest::Approx(5.0));
  }
  SUBCASE("two errors of five") {
    const std::vector<KeypointPair> pairs{kp(0, 0, 3, 4), kp(10, 10, 13, 6)};
    const auto d = reprojection_diagnostics(Homography::identity(), pairs);
    CHECK(d.accumulated_error == doctest::Approx(10.0));
    CHECK(d.average_error == doctest::Approx(5.0));
    CHECK(d.keypoint_count == 2);
  }
  SUBCASE("exact correspondences") {
    std::mt19937_64 rng(3);
    const auto h = random_offset_homography(rng);
    const auto set = exact_keypoints(h, 8, rng);
    const auto d = reprojection_diagnostics(estimate_homography(set), set);
    CHECK(d.average_error < 1e-6);
    CHECK(d.accumulated_error < 1e-6);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(reprojection_diagnostics(Homography::identity(), std::span<const KeypointPair>{}), Error);
  }
}

TEST_CASE("property: round trip through inverse") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 640.0), uy(0.0, 480.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = Homography::from_matrix(random_offset_homography(rng));
    for (int k = 0; k < 20; ++k) {
      const CameraPoint p(ux(rng), uy(rng));
      const CameraPoint q = h.apply_inverse(h.apply(p));
      CHECK(distance(p, q) < 1e-6);
    }
  }
}

TEST_CASE("property: noise-free recovery and permutation invariance") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Matrix3d truth = random_offset_homography(rng);
    const std::size_t n = 4 + trial % 8;
    const auto set = exact_keypoints(truth, n, rng);
    const auto est = estimate_homography(set);
    CHECK(max_abs_diff(est.matrix(), normalized(truth)) < 1e-9);

    auto shuffled = set.pairs();
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(max_abs_diff(estimate_homography(shuffled).matrix(), est.matrix()) < 1e-12);
  }
}

TEST_CASE("property: scale invariance of reprojection errors") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (double s : {0.5, 2.0, 3.7}) {
    const auto truth = random_offset_homography(rng);
    auto set = exact_keypoints(truth, 9, rng);
    std::vector<KeypointPair> noisy, scaled;
    for (const auto& p : set.pairs()) {
      const KeypointPair q{p.camera + CameraPoint(noise(rng), noise(rng)), p.twin, std::nullopt};
      noisy.push_back(q);
      scaled.push_back({q.camera * s, q.twin * s, std::nullopt});
    }
    const auto base = reprojection_diagnostics(estimate_homography(noisy), noisy);
    const auto big = reprojection_diagnostics(estimate_homography(scaled), scaled);
    for (std::size_t i = 0; i < base.per_point_errors.size(); ++i) {
      CHECK(big.per_point_errors[i] == doctest::Approx(s * base.per_point_errors[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: diagnostics invariants") {
  const auto d = CalibrationDiagnostics::from_errors({0.5, 1.25, 3.0, 0.0});
  CHECK(d.accumulated_error == doctest::Approx(4.75).epsilon(1e-12));
  CHECK(d.average_error == doctest::Approx(4.75 / 4).epsilon(1e-12));
  CHECK(d.keypoint_count == 4);
}

TEST_CASE("leave-one-out diagnostics") {
  std::mt19937_64 rng(21);
  const auto truth = random_offset_homography(rng);
  auto set = exact_keypoints(truth, 6, rng);
  const auto exact = leave_one_out_diagnostics(set.pairs());
  CHECK(exact.keypoint_count == 6);
  CHECK(exact.average_error < 1e-6);

  // Oracle: refit without each pair by hand.
  std::vector<KeypointPair> pairs = set.pairs();
  pairs[2].twin = pairs[2].twin + TwinPoint(4.0, -3.0);
  const auto loo = leave_one_out_diagnostics(pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::vector<KeypointPair> rest;
    for (std::size_t j = 0; j < pairs.size(); ++j)
      if (j != i) rest.push_back(pairs[j]);
    const double e = distance(apply_homography(estimate_homography(rest), pairs[i].camera), pairs[i].twin);
    CHECK(loo.per_point_errors[i] == doctest::Approx(e).epsilon(1e-12));
  }
  CHECK_THROWS_AS(leave_one_out_diagnostics(std::span(pairs).first(4)), Error);
}

TEST_CASE("keypoint error curve") {
  const sim::CameraPose pose;
  SUBCASE("noiseless pairs stay below 1e-6") {
    const auto set = sim::make_keypoints(pose, {640, 480}, 8, 0.0, 5);
    const auto curve = keypoint_error_curve(set, 4);
    REQUIRE(curve.size() == 5);
    for (const auto& e : curve) CHECK(e.diagnostics.average_error < 1e-6);
    CHECK(curve.front().keypoint_count == 4);
    CHECK(curve.back().keypoint_count == 8);
  }
  SUBCASE("min_count three is rejected") {
    const auto set = sim::make_keypoints(pose, {640, 480}, 8, 0.0, 5);
    try {
      keypoint_error_curve(set, 3);
      FAIL("expected TooFewPoints");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TooFewPoints);
    }
  }
  SUBCASE("entries match an independent hold-out computation") {
    const auto set = sim::make_keypoints(pose, {640, 480}, 10, 2.0, 42);
    const auto curve = keypoint_error_curve(set, 4);
    const auto& all = set.pairs();
    for (const auto& e : curve) {
      const std::size_t k = e.keypoint_count;
      if (k == all.size()) {
        CHECK(e.diagnostics.average_error == doctest::Approx(leave_one_out_diagnostics(all).average_error));
        continue;
      }
      const auto h = estimate_homography(std::span(all).first(k));
      double sum = 0.0;
      for (std::size_t i = k; i < all.size(); ++i) sum += distance(apply_homography(h, all[i].camera), all[i].twin);
      CHECK(e.diagnostics.average_error == doctest::Approx(sum / double(all.size() - k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("keypoints file round trip") {
  testing::TempDir dir("kp");
  KeypointSet set({1920, 1080}, {640, 480});
  set.add({CameraPoint(10.5, 20.25), TwinPoint(1, 2), std::string("corner")});
  set.add(kp(100, 200, 30, 40));
  save_keypoints(set, dir / "kp.json");
  CHECK(load_keypoints(dir / "kp.json") == set);

  const auto j = keypoints_to_json(set);
  CHECK(j.at("image_size_camera") == nlohmann::json::array({1920, 1080}));
  CHECK(j.at("pairs").at(0).at("label") == "corner");

  try {
    load_keypoints(dir / "missing.json");
    FAIL("expected FileNotFound");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FileNotFound);
  }
}
