#include "trackbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace trackbench {

std::string_view to_string(Metric m) { return m == Metric::Dtw ? "dtw" : "frechet"; }

Metric metric_from_string(std::string_view s) {
  if (s == "dtw") return Metric::Dtw;
  if (s == "frechet") return Metric::Frechet;
  throw Error(ErrorKind::InvalidConfig, "unknown metric \"" + std::string(s) + "\" (dtw|frechet)");
}

std::string_view to_string(FailureKind k) {
  return k == FailureKind::OffTrack ? "OffTrack" : "DidNotFinish";
}

namespace {

void require_nonempty(std::span<const TwinPoint> x, std::span<const TwinPoint> y) {
  if (x.empty() || y.empty()) {
    throw Error(ErrorKind::EmptySequence, "path distance needs two non-empty sequences");
  }
}

void require_clamp(std::optional<double> clamp) {
  if (clamp && !(*clamp > 0.0)) throw Error(ErrorKind::InvalidArgument, "clamp delta must be > 0");
}

struct DtwCell {
  double cost = std::numeric_limits<double>::infinity();
  std::int64_t length = 0;
  bool clamped = false;
};

// Lexicographic (cost, length) minimum; exact ties merge the clamped flags.
void relax(DtwCell& best, const DtwCell& cand) {
  if (cand.cost < best.cost || (cand.cost == best.cost && cand.length < best.length)) {
    best = cand;
  } else if (cand.cost == best.cost && cand.length == best.length) {
    best.clamped = best.clamped || cand.clamped;
  }
}

}  // namespace

PathDistanceResult dtw_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                std::optional<double> clamp_delta) {
  require_nonempty(x, y);
  require_clamp(clamp_delta);
  const std::size_t m = y.size();
  std::vector<DtwCell> prev(m), cur(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double c = distance(x[i], y[j]);
      bool clamped = false;
      if (clamp_delta && c > *clamp_delta) {
        c = *clamp_delta;
        clamped = true;
      }
      DtwCell best;
      if (i == 0 && j == 0) {
        best = {0.0, 0, false};
      } else {
        if (i > 0) relax(best, prev[j]);
        if (j > 0) relax(best, cur[j - 1]);
        if (i > 0 && j > 0) relax(best, prev[j - 1]);
      }
      cur[j] = {best.cost + c, best.length + 1, best.clamped || clamped};
    }
    std::swap(prev, cur);
  }
  const DtwCell& end = prev[m - 1];
  return {end.cost / static_cast<double>(end.length), Metric::Dtw, end.clamped};
}

PathDistanceResult frechet_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                    std::optional<double> clamp_delta) {
  require_nonempty(x, y);
  require_clamp(clamp_delta);
  const std::size_t m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  // Track the clamped and unclamped recurrences together; they differ only
  // when the clamp actually bounds the result.
  std::vector<double> prev(m), cur(m), prev_raw(m), cur_raw(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double raw = distance(x[i], y[j]);
      const double d = clamp_delta ? std::min(raw, *clamp_delta) : raw;
      double reach = inf, reach_raw = inf;
      if (i == 0 && j == 0) {
        reach = reach_raw = 0.0;
      } else {
        if (i > 0) reach = std::min(reach, prev[j]), reach_raw = std::min(reach_raw, prev_raw[j]);
        if (j > 0) reach = std::min(reach, cur[j - 1]), reach_raw = std::min(reach_raw, cur_raw[j - 1]);
        if (i > 0 && j > 0) {
          reach = std::min(reach, prev[j - 1]);
          reach_raw = std::min(reach_raw, prev_raw[j - 1]);
        }
      }
      cur[j] = std::max(d, reach);
      cur_raw[j] = std::max(raw, reach_raw);
    }
    std::swap(prev, cur);
    std::swap(prev_raw, cur_raw);
  }
  const bool clamped = clamp_delta && prev_raw[m - 1] > *clamp_delta;
  return {prev[m - 1], Metric::Frechet, clamped};
}

PathDistanceResult path_distance(std::span<const TwinPoint> x, std::span<const TwinPoint> y,
                                 Metric metric, std::optional<double> clamp_delta) {
  return metric == Metric::Dtw ? dtw_distance(x, y, clamp_delta)
                               : frechet_distance(x, y, clamp_delta);
}

double similarity_score(double distance, double baseline) {
  if (!(baseline > 0.0)) throw Error(ErrorKind::InvalidArgument, "baseline must be > 0");
  return std::min(100.0, 100.0 * std::max(0.0, 1.0 - distance / baseline));
}

double similarity_score(const PathDistanceResult& d, const SimilarityConfig& config) {
  return similarity_score(d.distance, config.baseline);
}

// ---------------------------------------------------------------------------
// Timing

StartLine::StartLine(TwinPoint a_, TwinPoint b_, double interval)
    : a(a_), b(b_), min_crossing_interval(interval) {
  if (a == b) throw Error(ErrorKind::InvalidArgument, "start line endpoints must differ");
  if (!(interval >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "min crossing interval must be >= 0");
  }
}

namespace {
// Interpolated crossing times carry rounding error; intervals equal to the
// debounce within this many seconds count as equal.
constexpr double kTimeTolerance = 1e-9;
}  // namespace

std::vector<Crossing> detect_crossings(const TwinTrajectory& t, const StartLine& line) {
  std::vector<Crossing> out;
  const double ex = line.b.x() - line.a.x(), ey = line.b.y() - line.a.y();
  const double len2 = ex * ex + ey * ey;
  auto side = [&](const TwinPoint& p) { return ex * (p.y() - line.a.y()) - ey * (p.x() - line.a.x()); };
  std::optional<double> last_accepted;
  for (std::size_t i = 1; i < t.samples.size(); ++i) {
    const auto& s0 = t.samples[i - 1];
    const auto& s1 = t.samples[i];
    const double d0 = side(s0.point), d1 = side(s1.point);
    // Half-open rule: leaving the line does not count, landing on it does.
    if (!((d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0))) continue;
    const double frac = d0 / (d0 - d1);
    const double qx = s0.point.x() + frac * (s1.point.x() - s0.point.x());
    const double qy = s0.point.y() + frac * (s1.point.y() - s0.point.y());
    const double u = ((qx - line.a.x()) * ex + (qy - line.a.y()) * ey) / len2;
    if (u < 0.0 || u > 1.0) continue;
    const double time = s0.time + frac * (s1.time - s0.time);
    if (last_accepted && time - *last_accepted < line.min_crossing_interval - kTimeTolerance) continue;
    last_accepted = time;
    out.push_back({time, d0 < d1 ? CrossingDirection::Forward : CrossingDirection::Backward});
  }
  return out;
}

CompletionResult completion_time(const std::vector<Crossing>& crossings, int required_laps,
                                 std::optional<double> trial_end_time) {
  if (required_laps < 1) throw Error(ErrorKind::InvalidArgument, "required_laps must be >= 1");
  CompletionResult result;
  std::vector<double> same;
  if (!crossings.empty()) {
    for (const auto& c : crossings) {
      if (c.direction == crossings.front().direction) same.push_back(c.time);
    }
  }
  const auto needed = static_cast<std::size_t>(required_laps) + 1;
  if (same.size() >= needed) {
    result.seconds = same[needed - 1] - same.front();
    return result;
  }
  std::ostringstream detail;
  detail << "completed " << (same.empty() ? 0 : same.size() - 1) << " of " << required_laps
         << " required lap(s); " << crossings.size() << " start-line crossing(s)";
  const double when = trial_end_time ? *trial_end_time : (same.empty() ? 0.0 : same.back());
  result.events.push_back({when, FailureKind::DidNotFinish, detail.str(), 0.0});
  return result;
}

std::vector<FailureEvent> off_track_events(const TwinTrajectory& t, const ReferencePath& ref,
                                           double corridor_px, double min_duration_s) {
  if (!(corridor_px > 0.0)) throw Error(ErrorKind::InvalidArgument, "corridor must be > 0");
  std::vector<FailureEvent> events;
  std::size_t i = 0;
  const std::size_t n = t.samples.size();
  while (i < n) {
    double dev = distance_to_path(ref, t.samples[i].point);
    if (dev <= corridor_px) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    double max_dev = dev;
    while (i + 1 < n) {
      dev = distance_to_path(ref, t.samples[i + 1].point);
      if (dev <= corridor_px) break;
      max_dev = std::max(max_dev, dev);
      ++i;
    }
    const double duration = t.samples[i].time - t.samples[start].time;
    if (duration >= min_duration_s) {
      std::ostringstream detail;
      detail << "off track for " << duration << " s (frames " << t.samples[start].frame_index
             << "-" << t.samples[i].frame_index << "), max deviation " << max_dev << " px";
      events.push_back({t.samples[start].time, FailureKind::OffTrack, detail.str(), duration});
    }
    ++i;
  }
  return events;
}

double suggest_baseline(const ReferencePath& ref) { return 0.10 * ref.arc_length; }

// ---------------------------------------------------------------------------
// Trial scoring

namespace {

std::vector<TwinPoint> aligned_reference(const ReferencePath& ref, const TwinPoint& first,
                                         int laps) {
  if (!ref.closed) return ref.points;
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ref.points.size(); ++i) {
    const double d = distance(ref.points[i], first);
    if (d < best) best = d, nearest = i;
  }
  std::vector<TwinPoint> out;
  out.reserve(ref.points.size() * static_cast<std::size_t>(laps));
  for (int lap = 0; lap < laps; ++lap) {
    for (std::size_t k = 0; k < ref.points.size(); ++k) {
      out.push_back(ref.points[(nearest + k) % ref.points.size()]);
    }
  }
  return out;
}

}  // namespace

TrialScore score_trial(const TwinTrajectory& t, const ReferencePath& ref,
                       const TrialScoringOptions& options) {
  if (t.samples.empty()) throw Error(ErrorKind::EmptySequence, "trajectory has no samples");
  TrialScore out;
  auto& score = out.score;

  const auto crossings = detect_crossings(t, options.start_line);
  auto completion = completion_time(crossings, options.required_laps, t.samples.back().time);
  score.completion_seconds = completion.seconds;

  std::vector<TwinPoint> scored;
  int laps = 1;
  if (completion.seconds) {
    const double begin = crossings.front().time;
    const double end = begin + *completion.seconds;
    for (const auto& s : t.samples) {
      if (s.time >= begin - kTimeTolerance && s.time < end - kTimeTolerance) scored.push_back(s.point);
    }
    out.window_start = begin;
    out.window_end = end;
    laps = options.required_laps;
  }
  if (scored.empty()) {
    scored = t.points();
    out.window_start = t.samples.front().time;
    out.window_end = t.samples.back().time;
    laps = 1;
  }
  out.scored_samples = scored.size();

  const auto& sim = options.similarity;
  auto evaluate = [&](const ReferencePath& r) {
    const auto y = aligned_reference(r, scored.front(), laps);
    return path_distance(scored, y, sim.metric, sim.clamp_delta);
  };
  score.distance = evaluate(ref);
  if (options.direction_auto) {
    const auto rev = evaluate(ref.reversed());
    if (rev.distance < score.distance.distance) {
      score.distance = rev;
      out.reference_reversed = true;
    }
  }
  score.similarity_percent = similarity_score(score.distance, sim);

  score.failure_events = off_track_events(t, ref, options.corridor_px, options.min_offtrack_s);
  for (auto& e : completion.events) score.failure_events.push_back(std::move(e));
  std::stable_sort(score.failure_events.begin(), score.failure_events.end(),
                   [](const FailureEvent& a, const FailureEvent& b) { return a.time < b.time; });
  return out;
}

}  // namespace trackbench
