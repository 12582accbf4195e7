#include "trackbench/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace trackbench {

namespace {

constexpr double kMinDeterminant = 1e-12;
constexpr double kMinHomogeneousScale = 1e-12;
// sigma_8 / sigma_1 below this means the DLT system has rank < 8.
constexpr double kRankTolerance = 1e-8;
constexpr double kCollinearTolerance = 1e-9;

template <Frame F>
std::string describe(const Point2<F>& p) {
  std::ostringstream out;
  out << "(" << p.x() << ", " << p.y() << ")";
  return out.str();
}

// Similarity transform moving the centroid to the origin with RMS distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double sq = 0.0;
  for (const auto& p : pts) sq += (p - centroid).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(pts.size()));
  if (rms <= 0.0) {
    throw Error(ErrorKind::DegenerateConfiguration, "all keypoints coincide");
  }
  const double s = std::sqrt(2.0) / rms;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

Eigen::Vector2d apply_affine(const Eigen::Matrix3d& t, const Eigen::Vector2d& p) {
  return {t(0, 0) * p.x() + t(0, 1) * p.y() + t(0, 2),
          t(1, 0) * p.x() + t(1, 1) * p.y() + t(1, 2)};
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

}  // namespace

// ---------------------------------------------------------------------------
// KeypointSet

KeypointSet::KeypointSet(ImageSize camera_size, ImageSize twin_size,
                         std::vector<KeypointPair> pairs)
    : camera_size_(camera_size), twin_size_(twin_size) {
  if (camera_size.width <= 0 || camera_size.height <= 0 || twin_size.width <= 0 ||
      twin_size.height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image sizes must be positive");
  }
  pairs_.reserve(pairs.size());
  for (auto& p : pairs) add(std::move(p));
}

void KeypointSet::validate(const KeypointPair& pair) const {
  if (!camera_size_.contains(pair.camera)) {
    throw Error(ErrorKind::OutOfBounds,
                "camera point " + describe(pair.camera) + " lies outside the camera image");
  }
  if (!twin_size_.contains(pair.twin)) {
    throw Error(ErrorKind::OutOfBounds,
                "twin point " + describe(pair.twin) + " lies outside the twin image");
  }
  for (const auto& existing : pairs_) {
    if (existing.camera == pair.camera) {
      throw Error(ErrorKind::DuplicateCameraPoint,
                  "camera point " + describe(pair.camera) + " is already used");
    }
  }
}

void KeypointSet::add(KeypointPair pair) {
  validate(pair);
  pairs_.push_back(std::move(pair));
}

void KeypointSet::remove(std::size_t index) {
  if (index >= pairs_.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "keypoint index " + std::to_string(index) +
                                                " out of range (have " +
                                                std::to_string(pairs_.size()) + ")");
  }
  pairs_.erase(pairs_.begin() + static_cast<std::ptrdiff_t>(index));
}

KeypointSet KeypointSet::prefix(std::size_t count) const {
  KeypointSet out(camera_size_, twin_size_);
  out.pairs_.assign(pairs_.begin(),
                    pairs_.begin() + static_cast<std::ptrdiff_t>(std::min(count, pairs_.size())));
  return out;
}

// ---------------------------------------------------------------------------
// Homography

Eigen::Matrix3d normalize_homography_matrix(const Eigen::Matrix3d& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorKind::DegenerateConfiguration, "homography matrix is zero or non-finite");
  }
  Eigen::Matrix3d out = m / norm;
  double sign_ref = out(2, 2);
  if (sign_ref == 0.0) {
    // Fall back to the first nonzero entry in row-major order.
    for (int i = 0; i < 9 && sign_ref == 0.0; ++i) sign_ref = out(i / 3, i % 3);
  }
  if (sign_ref < 0.0) out = -out;
  return out;
}

Homography Homography::identity() { return from_matrix(Matrix::Identity()); }

Homography Homography::from_matrix(const Matrix& m) {
  Matrix n = normalize_homography_matrix(m);
  if (std::abs(n.determinant()) <= kMinDeterminant) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "homography is not invertible; add or spread out keypoints");
  }
  return Homography(n);
}

Homography Homography::inverse() const { return from_matrix(matrix_.inverse()); }

namespace {
Eigen::Vector2d project(const Eigen::Matrix3d& m, double x, double y) {
  const Eigen::Vector3d q = m * Eigen::Vector3d(x, y, 1.0);
  if (std::abs(q.z()) <= kMinHomogeneousScale) {
    throw Error(ErrorKind::PointAtInfinity, "point maps to infinity under the homography");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}
}  // namespace

TwinPoint Homography::apply(const CameraPoint& p) const {
  const auto q = project(matrix_, p.x(), p.y());
  return {q.x(), q.y()};
}

CameraPoint Homography::apply_inverse(const TwinPoint& p) const {
  const auto q = project(matrix_.inverse(), p.x(), p.y());
  return {q.x(), q.y()};
}

TwinPoint apply_homography(const Homography& h, const CameraPoint& p) { return h.apply(p); }

// ---------------------------------------------------------------------------
// Estimation

Homography estimate_homography(std::span<const KeypointPair> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) {
    throw Error(ErrorKind::TooFewPoints,
                "homography needs at least 4 keypoint pairs, got " + std::to_string(n));
  }

  std::vector<Eigen::Vector2d> cam(n), twin(n);
  for (std::size_t i = 0; i < n; ++i) {
    cam[i] = {pairs[i].camera.x(), pairs[i].camera.y()};
    twin[i] = {pairs[i].twin.x(), pairs[i].twin.y()};
  }
  const Eigen::Matrix3d t_cam = normalizing_transform(cam);
  const Eigen::Matrix3d t_twin = normalizing_transform(twin);
  for (std::size_t i = 0; i < n; ++i) {
    cam[i] = apply_affine(t_cam, cam[i]);
    twin[i] = apply_affine(t_twin, twin[i]);
  }

  if (n == 4) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = a + 1; b < 4; ++b) {
        for (std::size_t c = b + 1; c < 4; ++c) {
          if (std::abs(cross(cam[a], cam[b], cam[c])) < kCollinearTolerance) {
            throw Error(ErrorKind::DegenerateConfiguration,
                        "three of the four camera keypoints are collinear; add keypoints");
          }
        }
      }
    }
  }

  // At least 9 rows so the SVD always reports nine singular values.
  const Eigen::Index rows = std::max<Eigen::Index>(9, static_cast<Eigen::Index>(2 * n));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = cam[i].x(), y = cam[i].y();
    const double u = twin[i].x(), v = twin[i].y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(7) / sv(0) < kRankTolerance) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "keypoints do not constrain a unique homography (rank-deficient system); "
                "add keypoints or avoid collinear placements");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  const Eigen::Matrix3d denorm = t_twin.inverse() * hn * t_cam;
  return Homography::from_matrix(denorm);
}

Homography estimate_homography(const KeypointSet& keypoints) {
  return estimate_homography(std::span<const KeypointPair>(keypoints.pairs()));
}

// ---------------------------------------------------------------------------
// Diagnostics

CalibrationDiagnostics CalibrationDiagnostics::from_errors(std::vector<double> errors) {
  CalibrationDiagnostics d;
  d.keypoint_count = errors.size();
  d.accumulated_error = std::accumulate(errors.begin(), errors.end(), 0.0);
  d.average_error = errors.empty() ? 0.0 : d.accumulated_error / static_cast<double>(errors.size());
  d.per_point_errors = std::move(errors);
  return d;
}

CalibrationDiagnostics reprojection_diagnostics(const Homography& h,
                                                std::span<const KeypointPair> check_points) {
  if (check_points.empty()) {
    throw Error(ErrorKind::TooFewPoints, "reprojection diagnostics need at least one pair");
  }
  std::vector<double> errors;
  errors.reserve(check_points.size());
  for (const auto& pair : check_points) {
    errors.push_back(distance(h.apply(pair.camera), pair.twin));
  }
  return CalibrationDiagnostics::from_errors(std::move(errors));
}

CalibrationDiagnostics reprojection_diagnostics(const Homography& h,
                                                const KeypointSet& check_points) {
  return reprojection_diagnostics(h, std::span<const KeypointPair>(check_points.pairs()));
}

CalibrationDiagnostics leave_one_out_diagnostics(std::span<const KeypointPair> pairs) {
  const std::size_t n = pairs.size();
  if (n < 5) {
    throw Error(ErrorKind::TooFewPoints,
                "leave-one-out diagnostics need at least 5 pairs, got " + std::to_string(n));
  }
  std::vector<double> errors;
  errors.reserve(n);
  std::vector<KeypointPair> others;
  others.reserve(n - 1);
  for (std::size_t held = 0; held < n; ++held) {
    others.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != held) others.push_back(pairs[i]);
    }
    const Homography h = estimate_homography(others);
    errors.push_back(distance(h.apply(pairs[held].camera), pairs[held].twin));
  }
  return CalibrationDiagnostics::from_errors(std::move(errors));
}

std::vector<ErrorCurveEntry> keypoint_error_curve(const KeypointSet& keypoints,
                                                  std::size_t min_count) {
  const std::size_t n = keypoints.size();
  if (min_count < 4) {
    throw Error(ErrorKind::TooFewPoints, "error curve min_count must be at least 4");
  }
  if (n < std::max<std::size_t>(5, min_count)) {
    throw Error(ErrorKind::TooFewPoints,
                "error curve needs at least max(5, min_count) pairs, got " + std::to_string(n));
  }
  const std::span<const KeypointPair> all(keypoints.pairs());
  std::vector<ErrorCurveEntry> curve;
  for (std::size_t k = min_count; k <= n; ++k) {
    ErrorCurveEntry entry;
    entry.keypoint_count = k;
    if (k < n) {
      const Homography h = estimate_homography(all.first(k));
      entry.diagnostics = reprojection_diagnostics(h, all.subspan(k));
    } else {
      entry.diagnostics = leave_one_out_diagnostics(all);
    }
    curve.push_back(std::move(entry));
  }
  return curve;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::PointAtInfinity: return "PointAtInfinity";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::DuplicateCameraPoint: return "DuplicateCameraPoint";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::BranchingSkeleton: return "BranchingSkeleton";
    case ErrorKind::DisconnectedSkeleton: return "DisconnectedSkeleton";
    case ErrorKind::ImageFormat: return "ImageFormat";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::NonMonotonicFrames: return "NonMonotonicFrames";
    case ErrorKind::NoDetections: return "NoDetections";
    case ErrorKind::DetectorFailed: return "DetectorFailed";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::CalibrationGate: return "CalibrationGate";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace trackbench
