#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "trackbench/detections.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/image.hpp"
#include "trackbench/metrics.hpp"
#include "trackbench/track.hpp"

namespace trackbench::sim {

// Seeded generator with a stable stream on every platform: std::mt19937_64
// (fully specified by the standard) feeding 53-bit uniforms and Box-Muller
// normals. std::normal_distribution is avoided because its algorithm is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // N(0, 1)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Pinhole camera above a flat track. The twin point `target` is where the
// optical axis meets the ground; the camera looks toward decreasing twin y.
struct CameraPose {
  double height_m = 2.15;
  double pitch_deg = 41.0;
  double focal_length_px = 1000.0;
  ImageSize image_size{1920, 1080};
  double ground_scale = 100.0;  // twin px per meter
  TwinPoint target{320.0, 240.0};

  void validate() const;
};

// Exact plane-induced map from twin pixels to camera pixels (normalized).
Eigen::Matrix3d plane_homography(const CameraPose& pose);
// Its inverse as a camera -> twin Homography.
Homography camera_to_twin(const CameraPose& pose);
CameraPoint project_to_camera(const Eigen::Matrix3d& twin_to_camera, const TwinPoint& p);

// `count` random in-view correspondences with optional Gaussian noise on the
// camera side. Pair order is the generation order.
KeypointSet make_keypoints(const CameraPose& pose, ImageSize twin_size, std::size_t count,
                           double camera_noise_px, std::uint64_t seed);

enum class PathShape { Oval, FigureEight };

struct PathSpec {
  PathShape shape = PathShape::Oval;
  TwinPoint center{320.0, 240.0};
  double semi_x = 250.0;  // twin px
  double semi_y = 150.0;
};

struct SimScenario {
  PathSpec path;
  double lap_time = 20.0;
  double fps = 30.0;
  int laps = 1;
  double noise_sigma_px = 0.0;
  std::uint64_t seed = 1;
  CameraPose camera;
  ImageSize twin_size{640, 480};
  int stroke_width_px = 9;
  std::size_t keypoint_count = 8;
  double keypoint_noise_px = 0.0;
  double baseline_px = 20.0;

  void validate() const;
  std::size_t frames_per_lap() const;
};

SimScenario scenario_from_json(const nlohmann::json& j);

// Closed path of `count` points evenly spaced in arc length along the shape.
ReferencePath sample_path(const PathSpec& spec, std::size_t count);

GrayImage render_track(const PathSpec& spec, ImageSize size, int stroke_width_px);

struct SimFixture {
  GrayImage track;
  ReferencePath reference;
  KeypointSet keypoints;
  std::string detections_jsonl;
  TwinTrajectory truth_trajectory;
  CameraTrajectory camera_trajectory;
  StartLine start_line;
  TrialScore truth;
  Eigen::Matrix3d twin_to_camera;
};

TrialScoringOptions scoring_options(const SimScenario& s, const StartLine& line);

SimFixture simulate_trial(const SimScenario& s);

// Writes track.png, ref_path.json, keypoints.json, detections.jsonl,
// truth.json and a ready-to-run config.json into `dir`.
void write_fixture(const SimFixture& fixture, const SimScenario& s, const std::filesystem::path& dir);

}  // namespace trackbench::sim
