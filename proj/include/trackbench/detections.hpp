#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trackbench/geometry.hpp"

namespace trackbench {

struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  CameraPoint center() const { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }
  bool operator==(const BoundingBox&) const = default;
};

struct DetectionRecord {
  std::int64_t frame_index = 0;
  std::optional<BoundingBox> bbox;
  CameraPoint centroid;  // explicit centroid, or the bbox center
  double confidence = 1.0;
};

class MalformedLineError : public Error {
 public:
  MalformedLineError(std::size_t line, const std::string& reason)
      : Error(ErrorKind::MalformedLine, "line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class PointAtInfinityError : public Error {
 public:
  explicit PointAtInfinityError(std::int64_t frame)
      : Error(ErrorKind::PointAtInfinity,
              "frame " + std::to_string(frame) + " maps to infinity under the homography"),
        frame_(frame) {}
  std::int64_t frame_index() const { return frame_; }

 private:
  std::int64_t frame_;
};

template <Frame F>
struct TrajectorySample {
  std::int64_t frame_index = 0;
  double time = 0.0;  // seconds, frame_index / fps
  Point2<F> point;
};

struct FrameGap {
  std::int64_t start_frame = 0;  // first missing frame
  std::int64_t end_frame = 0;    // last missing frame (inclusive)
  bool operator==(const FrameGap&) const = default;
};

template <Frame F>
struct Trajectory {
  std::vector<TrajectorySample<F>> samples;
  double fps = 0.0;
  std::vector<FrameGap> gaps;

  std::vector<Point2<F>> points() const {
    std::vector<Point2<F>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.point);
    return out;
  }
  double duration() const {
    return samples.size() < 2 ? 0.0 : samples.back().time - samples.front().time;
  }
};

using CameraTrajectory = Trajectory<Frame::Camera>;
using TwinTrajectory = Trajectory<Frame::Twin>;

// Parses JSONL detections. Duplicate frame indices keep the highest-confidence
// record (first occurrence on ties).
std::vector<DetectionRecord> parse_detections(std::istream& stream);
std::vector<DetectionRecord> parse_detections(std::string_view text);

CameraTrajectory build_trajectory(const std::vector<DetectionRecord>& records, double fps,
                                  double min_confidence);

TwinTrajectory transform_trajectory(const CameraTrajectory& t, const Homography& h);

// Centered moving average inside each contiguous (gap-free) run.
template <Frame F>
Trajectory<F> smooth_trajectory(const Trajectory<F>& t, int window);

// Runs `<command> <frame_glob>` through the shell and parses its stdout.
std::vector<DetectionRecord> run_external_detector(const std::string& command,
                                                   const std::string& frame_glob);

}  // namespace trackbench
