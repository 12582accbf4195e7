#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trackbench/detections.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/track.hpp"

namespace trackbench {

enum class Metric { Dtw, Frechet };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct SimilarityConfig {
  Metric metric = Metric::Dtw;
  std::optional<double> clamp_delta;  // twin px
  double baseline = 0.0;              // twin px, must be > 0
};

struct PathDistanceResult {
  double distance = 0.0;
  Metric metric = Metric::Dtw;
  bool clamped = false;
};

// Mean per-step cost along the optimal warping path. Ties in accumulated cost
// prefer the shorter path.
PathDistanceResult dtw_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                std::optional<double> clamp_delta = std::nullopt);

// Discrete Frechet distance. `clamped` is set when the clamp lowered the result.
PathDistanceResult frechet_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                    std::optional<double> clamp_delta = std::nullopt);

PathDistanceResult path_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                 Metric metric, std::optional<double> clamp_delta);

// S = min(100, 100 * max(0, 1 - d / B)), in percent.
double similarity_score(double distance, double baseline);
double similarity_score(const PathDistanceResult& d, const SimilarityConfig& config);

enum class FailureKind { OffTrack, DidNotFinish };
std::string_view to_string(FailureKind k);

struct FailureEvent {
  double time = 0.0;
  FailureKind kind = FailureKind::OffTrack;
  std::string detail;
  double duration = 0.0;  // seconds; 0 for DidNotFinish
};

struct BenchmarkScore {
  double similarity_percent = 0.0;
  PathDistanceResult distance;
  std::optional<double> completion_seconds;
  std::vector<FailureEvent> failure_events;
};

struct StartLine {
  TwinPoint a;
  TwinPoint b;
  double min_crossing_interval = 0.0;

  StartLine(TwinPoint a, TwinPoint b, double min_crossing_interval = 0.0);
};

enum class CrossingDirection { Forward, Backward };

struct Crossing {
  double time = 0.0;
  CrossingDirection direction = CrossingDirection::Forward;
};

// Forward means the motion vector has a positive cross product with (b - a).
std::vector<Crossing> detect_crossings(const TwinTrajectory& t, const StartLine& line);

struct CompletionResult {
  std::optional<double> seconds;
  std::vector<FailureEvent> events;  // one DidNotFinish when seconds is empty
};

// Time from the first crossing to the (required_laps + 1)-th crossing in the
// same direction.
CompletionResult completion_time(const std::vector<Crossing>& crossings, int required_laps,
                                 std::optional<double> trial_end_time = std::nullopt);

std::vector<FailureEvent> off_track_events(const TwinTrajectory& t, const ReferencePath& ref,
                                           double corridor_px, double min_duration_s);

double suggest_baseline(const ReferencePath& ref);

struct TrialScoringOptions {
  SimilarityConfig similarity;
  StartLine start_line;
  int required_laps = 1;
  double corridor_px = 40.0;
  double min_offtrack_s = 0.5;
  bool direction_auto = true;
};

struct TrialScore {
  BenchmarkScore score;
  bool reference_reversed = false;
  std::size_t scored_samples = 0;
  double window_start = 0.0;
  double window_end = 0.0;
};

// Scores a twin-frame trajectory end to end. When the run completes, the
// similarity is computed over the timed laps; closed references are rotated
// to begin at the vertex nearest the first scored sample and repeated once per
// required lap.
TrialScore score_trial(const TwinTrajectory& t, const ReferencePath& ref,
                       const TrialScoringOptions& options);

}  // namespace trackbench
