#include "trackbench/detections.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

namespace trackbench {

using nlohmann::json;

namespace {

double number_at(const json& arr, std::size_t i) { return arr[i].get<double>(); }

bool all_numbers(const json& arr, std::size_t n) {
  if (!arr.is_array() || arr.size() != n) return false;
  for (const auto& v : arr) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) return false;
  }
  return true;
}

DetectionRecord parse_record(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw MalformedLineError(lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedLineError(lineno, "expected a JSON object");
  if (!j.contains("frame_index") || !j["frame_index"].is_number_integer()) {
    throw MalformedLineError(lineno, "frame_index must be an integer");
  }
  DetectionRecord r;
  r.frame_index = j["frame_index"].get<std::int64_t>();
  if (r.frame_index < 0) throw MalformedLineError(lineno, "frame_index must be non-negative");

  const bool has_bbox = j.contains("bbox") && !j["bbox"].is_null();
  const bool has_centroid = j.contains("centroid") && !j["centroid"].is_null();
  if (!has_bbox && !has_centroid) {
    throw MalformedLineError(lineno, "record needs a bbox or a centroid");
  }
  if (has_bbox) {
    const auto& b = j["bbox"];
    if (!all_numbers(b, 4)) throw MalformedLineError(lineno, "bbox must be 4 finite numbers");
    BoundingBox box{number_at(b, 0), number_at(b, 1), number_at(b, 2), number_at(b, 3)};
    if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
      throw MalformedLineError(lineno, "bbox must satisfy x_min < x_max and y_min < y_max");
    }
    r.bbox = box;
    r.centroid = box.center();
  }
  if (has_centroid) {
    const auto& c = j["centroid"];
    if (!all_numbers(c, 2)) throw MalformedLineError(lineno, "centroid must be 2 finite numbers");
    const CameraPoint centroid(number_at(c, 0), number_at(c, 1));
    if (r.bbox && distance(centroid, r.bbox->center()) > 0.5) {
      throw MalformedLineError(lineno, "centroid disagrees with bbox center by more than 0.5 px");
    }
    r.centroid = centroid;
  }
  if (j.contains("confidence")) {
    if (!j["confidence"].is_number()) throw MalformedLineError(lineno, "confidence must be a number");
    r.confidence = j["confidence"].get<double>();
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw MalformedLineError(lineno, "confidence must lie in [0, 1]");
    }
  }
  return r;
}

}  // namespace

std::vector<DetectionRecord> parse_detections(std::istream& stream) {
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(stream, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DetectionRecord r = parse_record(line, lineno);
    if (!out.empty()) {
      auto& last = out.back();
      if (r.frame_index < last.frame_index) {
        throw Error(ErrorKind::NonMonotonicFrames,
                    "line " + std::to_string(lineno) + ": frame_index " +
                        std::to_string(r.frame_index) + " follows " +
                        std::to_string(last.frame_index));
      }
      if (r.frame_index == last.frame_index) {
        if (r.confidence > last.confidence) last = r;
        continue;
      }
    }
    out.push_back(r);
  }
  return out;
}

std::vector<DetectionRecord> parse_detections(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_detections(in);
}

CameraTrajectory build_trajectory(const std::vector<DetectionRecord>& records, double fps,
                                  double min_confidence) {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorKind::InvalidArgument, "fps must be positive");
  }
  CameraTrajectory t;
  t.fps = fps;
  for (const auto& r : records) {
    if (r.confidence < min_confidence) continue;
    if (!t.samples.empty()) {
      auto& last = t.samples.back();
      if (r.frame_index < last.frame_index) {
        throw Error(ErrorKind::NonMonotonicFrames, "detection records are not sorted by frame");
      }
      if (r.frame_index == last.frame_index) continue;  // already deduplicated upstream
      if (r.frame_index > last.frame_index + 1) {
        t.gaps.push_back({last.frame_index + 1, r.frame_index - 1});
      }
    }
    t.samples.push_back({r.frame_index, static_cast<double>(r.frame_index) / fps, r.centroid});
  }
  if (t.samples.empty()) {
    throw Error(ErrorKind::NoDetections,
                "no detection reaches min_confidence " + std::to_string(min_confidence));
  }
  return t;
}

TwinTrajectory transform_trajectory(const CameraTrajectory& t, const Homography& h) {
  TwinTrajectory out;
  out.fps = t.fps;
  out.gaps = t.gaps;
  out.samples.reserve(t.samples.size());
  for (const auto& s : t.samples) {
    try {
      out.samples.push_back({s.frame_index, s.time, h.apply(s.point)});
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::PointAtInfinity) throw PointAtInfinityError(s.frame_index);
      throw;
    }
  }
  return out;
}

template <Frame F>
Trajectory<F> smooth_trajectory(const Trajectory<F>& t, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "smoothing window must be a positive odd integer");
  }
  Trajectory<F> out = t;
  if (window == 1) return out;
  const std::ptrdiff_t half = window / 2;
  const auto n = static_cast<std::ptrdiff_t>(t.samples.size());
  std::ptrdiff_t run_start = 0;
  while (run_start < n) {
    std::ptrdiff_t run_end = run_start + 1;
    while (run_end < n && t.samples[run_end].frame_index == t.samples[run_end - 1].frame_index + 1) {
      ++run_end;
    }
    for (std::ptrdiff_t i = run_start; i < run_end; ++i) {
      const std::ptrdiff_t lo = std::max(run_start, i - half);
      const std::ptrdiff_t hi = std::min(run_end - 1, i + half);
      double sx = 0.0, sy = 0.0;
      for (std::ptrdiff_t k = lo; k <= hi; ++k) {
        sx += t.samples[k].point.x();
        sy += t.samples[k].point.y();
      }
      const double cnt = static_cast<double>(hi - lo + 1);
      out.samples[i].point = Point2<F>(sx / cnt, sy / cnt);
    }
    run_start = run_end;
  }
  return out;
}

template CameraTrajectory smooth_trajectory(const CameraTrajectory&, int);
template TwinTrajectory smooth_trajectory(const TwinTrajectory&, int);

namespace {
std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}
}  // namespace

std::vector<DetectionRecord> run_external_detector(const std::string& command,
                                                   const std::string& frame_glob) {
  const std::string cmd = command + " " + shell_quote(frame_glob);
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(ErrorKind::DetectorFailed, "cannot start detector: " + command);
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorKind::DetectorFailed,
                "detector command exited with status " +
                    std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ": " + command);
  }
  return parse_detections(output);
}

}  // namespace trackbench
