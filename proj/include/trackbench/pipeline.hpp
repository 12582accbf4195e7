#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbench/detections.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/image.hpp"
#include "trackbench/metrics.hpp"
#include "trackbench/track.hpp"

namespace trackbench {

inline constexpr const char* kVersion = "0.1.0";

struct BenchmarkConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::filesystem::path track_image;
  std::optional<std::filesystem::path> reference_path;
  TrackOptions track;

  std::filesystem::path keypoints;
  std::optional<double> max_average_error_px;

  std::optional<std::filesystem::path> detections_path;
  std::optional<std::string> detector_command;
  std::optional<std::string> detector_frames;
  double min_confidence = 0.25;
  int smoothing_window = 1;

  double fps = 0.0;

  SimilarityConfig similarity;
  int required_laps = 1;
  double corridor_px = 40.0;
  double min_offtrack_s = 0.5;
  bool direction_auto = true;

  TwinPoint start_a;
  TwinPoint start_b;
  double min_crossing_interval_s = 1.0;

  std::filesystem::path output_dir;

  nlohmann::json source;  // the parsed document, echoed into the report

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

BenchmarkConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
BenchmarkConfig load_config(const std::filesystem::path& path);

// Error tagged with the pipeline stage it came from; keeps the original kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct OverlayInputs {
  const GrayImage* track = nullptr;
  const ReferencePath* reference = nullptr;
  const TwinTrajectory* trajectory = nullptr;
  std::optional<StartLine> start_line;
  const KeypointSet* keypoints = nullptr;
  std::vector<FailureEvent> events;
};

// SVG with one labeled <g> layer per element kind.
std::string render_overlay(const OverlayInputs& in);

struct BenchmarkRun {
  nlohmann::json report;
  std::string overlay_svg;
  GrayImage track;
  ReferencePath reference;
  Homography homography = Homography::identity();
  CalibrationDiagnostics calibration;
  TwinTrajectory trajectory;
  TrialScore score;
};

// Runs every stage in memory; nothing is written.
BenchmarkRun run_benchmark(const BenchmarkConfig& config);

// Writes report.json and overlay.svg into the output directory atomically
// (temporary files renamed into place).
void write_outputs(const BenchmarkRun& run, const std::filesystem::path& output_dir);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

// Throws InvalidArgument describing the first schema violation.
void validate_report_schema(const nlohmann::json& report);

nlohmann::json score_to_json(const BenchmarkScore& score);
BenchmarkScore score_from_json(const nlohmann::json& j);

}  // namespace trackbench
