#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trackbench/error.hpp"

namespace trackbench {

enum class Frame { Camera, Twin };

// A finite 2-D pixel position tagged with its coordinate frame at compile
// time, so camera and twin coordinates cannot be mixed by accident.
template <Frame F>
class Point2 {
 public:
  static constexpr Frame frame = F;

  Point2() = default;
  Point2(double x, double y) : x_(x), y_(y) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw Error(ErrorKind::InvalidArgument, "point coordinates must be finite");
    }
  }

  double x() const { return x_; }
  double y() const { return y_; }

  Point2 operator+(const Point2& o) const { return {x_ + o.x_, y_ + o.y_}; }
  Point2 operator-(const Point2& o) const { return {x_ - o.x_, y_ - o.y_}; }
  Point2 operator*(double s) const { return {x_ * s, y_ * s}; }
  bool operator==(const Point2&) const = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
};

using CameraPoint = Point2<Frame::Camera>;
using TwinPoint = Point2<Frame::Twin>;

template <Frame F>
double distance(const Point2<F>& a, const Point2<F>& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y());
}

struct ImageSize {
  int width = 0;
  int height = 0;

  template <Frame F>
  bool contains(const Point2<F>& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width && p.y() <= height;
  }
  bool operator==(const ImageSize&) const = default;
};

struct KeypointPair {
  CameraPoint camera;
  TwinPoint twin;
  std::optional<std::string> label;

  bool operator==(const KeypointPair&) const = default;
};

// Ordered camera/twin correspondences with the image extents they live in.
// Construction validates bounds and rejects duplicate camera points.
class KeypointSet {
 public:
  KeypointSet(ImageSize camera_size, ImageSize twin_size,
              std::vector<KeypointPair> pairs = {});

  // Appends a pair after validating it against the current set.
  void add(KeypointPair pair);
  void remove(std::size_t index);

  const std::vector<KeypointPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  ImageSize camera_size() const { return camera_size_; }
  ImageSize twin_size() const { return twin_size_; }

  // Subset made of the first `count` pairs.
  KeypointSet prefix(std::size_t count) const;

  bool operator==(const KeypointSet&) const = default;

 private:
  void validate(const KeypointPair& pair) const;

  ImageSize camera_size_;
  ImageSize twin_size_;
  std::vector<KeypointPair> pairs_;
};

// Projective map from camera pixels to twin pixels. The matrix is kept with
// unit Frobenius norm and a non-negative bottom-right entry.
class Homography {
 public:
  using Matrix = Eigen::Matrix3d;

  static Homography identity();
  // Normalizes `m`; throws DegenerateConfiguration when it is not invertible.
  static Homography from_matrix(const Matrix& m);

  const Matrix& matrix() const { return matrix_; }
  Homography inverse() const;

  TwinPoint apply(const CameraPoint& p) const;
  // Maps a twin point back into the camera frame.
  CameraPoint apply_inverse(const TwinPoint& p) const;

 private:
  explicit Homography(const Matrix& m) : matrix_(m) {}
  Matrix matrix_;
};

// Normalizes a matrix to the Homography convention without validating it.
Eigen::Matrix3d normalize_homography_matrix(const Eigen::Matrix3d& m);

struct CalibrationDiagnostics {
  double average_error = 0.0;
  double accumulated_error = 0.0;
  std::vector<double> per_point_errors;
  std::size_t keypoint_count = 0;

  static CalibrationDiagnostics from_errors(std::vector<double> errors);
};

struct ErrorCurveEntry {
  std::size_t keypoint_count = 0;
  CalibrationDiagnostics diagnostics;
};

// Normalized direct linear transform over all pairs.
Homography estimate_homography(std::span<const KeypointPair> pairs);
Homography estimate_homography(const KeypointSet& keypoints);

TwinPoint apply_homography(const Homography& h, const CameraPoint& p);

CalibrationDiagnostics reprojection_diagnostics(const Homography& h,
                                                std::span<const KeypointPair> check_points);
CalibrationDiagnostics reprojection_diagnostics(const Homography& h,
                                                const KeypointSet& check_points);

// Leave-one-out diagnostics: every pair is scored against the fit of all the
// others. Needs at least five pairs.
CalibrationDiagnostics leave_one_out_diagnostics(std::span<const KeypointPair> pairs);

// Out-of-sample transformation error as a function of keypoint count. For
// each k in [min_count, n], pairs k+1..n are scored against the fit to the
// first k pairs; at k = n every pair is scored leave-one-out.
std::vector<ErrorCurveEntry> keypoint_error_curve(const KeypointSet& keypoints,
                                                  std::size_t min_count);

}  // namespace trackbench
