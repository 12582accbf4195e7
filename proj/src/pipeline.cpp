#include "trackbench/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "trackbench/json_reader.hpp"
#include "trackbench/keypoints_io.hpp"

namespace trackbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

fs::path BenchmarkConfig::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

TwinPoint point_field(ObjectReader& r, const std::string& key) {
  const auto& v = r.required(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorKind::InvalidConfig, r.key_path(key) + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

void require_file(const BenchmarkConfig& c, const fs::path& p, const std::string& key) {
  if (!fs::is_regular_file(c.resolve(p))) {
    throw Error(ErrorKind::FileNotFound, key + ": file not found: " + c.resolve(p).string());
  }
}

}  // namespace

BenchmarkConfig config_from_json(const json& j, const fs::path& base_dir) {
  BenchmarkConfig c;
  c.base_dir = base_dir;
  c.source = j;
  ObjectReader root(j, "");

  {
    auto t = root.object("track");
    c.track_image = t.string("image");
    if (auto ref = t.optional_string("reference_path")) c.reference_path = *ref;
    c.track.threshold = static_cast<int>(t.integer("threshold", 128));
    c.track.track_is_bright = t.boolean("is_bright", true);
    const long long count = t.integer("resample_count", 512);
    if (c.track.threshold < 0 || c.track.threshold > 255) {
      throw Error(ErrorKind::InvalidConfig, "track.threshold must lie in [0, 255]");
    }
    if (count < 2) throw Error(ErrorKind::InvalidConfig, "track.resample_count must be >= 2");
    c.track.resample_count = static_cast<std::size_t>(count);
    t.finish();
  }
  {
    auto cal = root.object("calibration");
    c.keypoints = cal.string("keypoints");
    c.max_average_error_px = cal.optional_number("max_average_error_px");
    cal.finish();
  }
  {
    auto d = root.object("detections");
    if (auto p = d.optional_string("path")) c.detections_path = *p;
    c.min_confidence = d.number("min_confidence", 0.25);
    c.smoothing_window = static_cast<int>(d.integer("smoothing_window", 1));
    if (c.smoothing_window < 1 || c.smoothing_window % 2 == 0) {
      throw Error(ErrorKind::InvalidConfig, "detections.smoothing_window must be a positive odd integer");
    }
    d.finish();
  }
  if (auto det = root.optional_object("detector")) {
    c.detector_command = det->string("command");
    c.detector_frames = det->string("frames");
    det->finish();
  }
  if (c.detections_path.has_value() == c.detector_command.has_value()) {
    throw Error(ErrorKind::InvalidConfig,
                "set exactly one of detections.path or detector.command");
  }
  c.fps = root.number("fps");
  if (!(c.fps > 0.0)) throw Error(ErrorKind::InvalidConfig, "fps must be > 0");
  {
    auto m = root.object("metric");
    c.similarity.metric = metric_from_string(m.optional_string("kind").value_or("dtw"));
    c.similarity.baseline = m.number("baseline_px");
    c.similarity.clamp_delta = m.optional_number("clamp_delta_px");
    c.required_laps = static_cast<int>(m.integer("required_laps", 1));
    c.corridor_px = m.number("corridor_px", 40.0);
    c.min_offtrack_s = m.number("min_offtrack_s", 0.5);
    c.direction_auto = m.boolean("direction_auto", true);
    if (!(c.similarity.baseline > 0.0)) throw Error(ErrorKind::InvalidConfig, "metric.baseline_px must be > 0");
    if (c.similarity.clamp_delta && !(*c.similarity.clamp_delta > 0.0)) {
      throw Error(ErrorKind::InvalidConfig, "metric.clamp_delta_px must be > 0");
    }
    if (c.required_laps < 1) throw Error(ErrorKind::InvalidConfig, "metric.required_laps must be >= 1");
    if (!(c.corridor_px > 0.0)) throw Error(ErrorKind::InvalidConfig, "metric.corridor_px must be > 0");
    if (!(c.min_offtrack_s >= 0.0)) throw Error(ErrorKind::InvalidConfig, "metric.min_offtrack_s must be >= 0");
    m.finish();
  }
  {
    auto s = root.object("start_line");
    c.start_a = point_field(s, "a");
    c.start_b = point_field(s, "b");
    c.min_crossing_interval_s = s.number("min_crossing_interval_s", 1.0);
    if (c.start_a == c.start_b) throw Error(ErrorKind::InvalidConfig, "start_line.a and start_line.b must differ");
    if (!(c.min_crossing_interval_s >= 0.0)) {
      throw Error(ErrorKind::InvalidConfig, "start_line.min_crossing_interval_s must be >= 0");
    }
    s.finish();
  }
  c.output_dir = root.optional_string("output_dir").value_or("out");
  root.finish();

  require_file(c, c.track_image, "track.image");
  if (c.reference_path) require_file(c, *c.reference_path, "track.reference_path");
  require_file(c, c.keypoints, "calibration.keypoints");
  if (c.detections_path) require_file(c, *c.detections_path, "detections.path");
  return c;
}

BenchmarkConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorKind::Io, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot read " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

// ---------------------------------------------------------------------------
// Overlay

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

template <typename Points>
std::string points_attr(const Points& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ' ';
    out += fmt(p.x()) + "," + fmt(p.y());
  }
  return out;
}

}  // namespace

std::string render_overlay(const OverlayInputs& in) {
  const int w = in.track ? in.track->width : 0;
  const int h = in.track ? in.track->height : 0;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";

  svg << "<g id=\"track\" data-layer=\"track\">\n";
  if (in.track) {
    svg << "<image class=\"track-image\" x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
        << "\" opacity=\"0.5\" href=\"data:image/png;base64," << base64(encode_png(*in.track))
        << "\"/>\n";
  }
  svg << "</g>\n";

  svg << "<g id=\"reference-path\" data-layer=\"reference-path\">\n";
  if (in.reference) {
    svg << "<" << (in.reference->closed ? "polygon" : "polyline")
        << " class=\"reference\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\""
        << points_attr(in.reference->points) << "\"/>\n";
  }
  svg << "</g>\n";

  svg << "<g id=\"trajectory\" data-layer=\"trajectory\">\n";
  if (in.trajectory && !in.trajectory->samples.empty()) {
    const auto& samples = in.trajectory->samples;
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= samples.size(); ++i) {
      if (i == samples.size() || samples[i].frame_index != samples[i - 1].frame_index + 1) {
        std::vector<TwinPoint> run;
        for (std::size_t k = run_start; k < i; ++k) run.push_back(samples[k].point);
        svg << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" "
            << "points=\"" << points_attr(run) << "\"/>\n";
        run_start = i;
      }
    }
  }
  svg << "</g>\n";

  svg << "<g id=\"start-line\" data-layer=\"start-line\">\n";
  if (in.start_line) {
    svg << "<line class=\"start-line\" stroke=\"#2ca02c\" stroke-width=\"3\" x1=\""
        << fmt(in.start_line->a.x()) << "\" y1=\"" << fmt(in.start_line->a.y()) << "\" x2=\""
        << fmt(in.start_line->b.x()) << "\" y2=\"" << fmt(in.start_line->b.y()) << "\"/>\n";
  }
  svg << "</g>\n";

  svg << "<g id=\"keypoints\" data-layer=\"keypoints\">\n";
  if (in.keypoints) {
    std::size_t index = 0;
    for (const auto& pair : in.keypoints->pairs()) {
      ++index;
      svg << "<circle class=\"keypoint\" cx=\"" << fmt(pair.twin.x()) << "\" cy=\""
          << fmt(pair.twin.y()) << "\" r=\"4\" fill=\"#9467bd\"/>"
          << "<text class=\"keypoint-label\" x=\"" << fmt(pair.twin.x() + 6) << "\" y=\""
          << fmt(pair.twin.y() - 6) << "\" font-size=\"10\">"
          << xml_escape(pair.label.value_or(std::to_string(index))) << "</text>\n";
    }
  }
  svg << "</g>\n";

  svg << "<g id=\"failure-events\" data-layer=\"failure-events\">\n";
  for (const auto& e : in.events) {
    double x = 0.0, y = 0.0;
    if (in.trajectory && !in.trajectory->samples.empty()) {
      // Marker at the sample closest in time to the event.
      const auto& samples = in.trajectory->samples;
      std::size_t best = 0;
      for (std::size_t i = 1; i < samples.size(); ++i) {
        if (std::abs(samples[i].time - e.time) < std::abs(samples[best].time - e.time)) best = i;
      }
      x = samples[best].point.x();
      y = samples[best].point.y();
    }
    svg << "<circle class=\"failure-marker\" data-kind=\"" << to_string(e.kind) << "\" cx=\""
        << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"8\" fill=\"none\" stroke=\"#ff7f0e\" "
        << "stroke-width=\"3\"><title>" << xml_escape(std::string(to_string(e.kind)) + " at " +
                                                      fmt(e.time) + " s: " + e.detail)
        << "</title></circle>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Report

json score_to_json(const BenchmarkScore& score) {
  json events = json::array();
  for (const auto& e : score.failure_events) {
    events.push_back({{"time_s", e.time},
                      {"kind", std::string(to_string(e.kind))},
                      {"duration_s", e.duration},
                      {"detail", e.detail}});
  }
  return {{"path_similarity_percent", score.similarity_percent},
          {"distance_px", score.distance.distance},
          {"metric", std::string(to_string(score.distance.metric))},
          {"clamped", score.distance.clamped},
          {"completion_seconds",
           score.completion_seconds ? json(*score.completion_seconds) : json(nullptr)},
          {"failure_events", std::move(events)}};
}

BenchmarkScore score_from_json(const json& j) {
  BenchmarkScore s;
  s.similarity_percent = j.at("path_similarity_percent").get<double>();
  s.distance.distance = j.at("distance_px").get<double>();
  s.distance.metric = metric_from_string(j.at("metric").get<std::string>());
  s.distance.clamped = j.at("clamped").get<bool>();
  if (!j.at("completion_seconds").is_null()) {
    s.completion_seconds = j.at("completion_seconds").get<double>();
  }
  for (const auto& e : j.at("failure_events")) {
    const auto kind = e.at("kind").get<std::string>();
    s.failure_events.push_back(
        {e.at("time_s").get<double>(),
         kind == "OffTrack" ? FailureKind::OffTrack : FailureKind::DidNotFinish,
         e.at("detail").get<std::string>(), e.at("duration_s").get<double>()});
  }
  return s;
}

void validate_report_schema(const json& report) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "report schema: " + what); };
  auto expect_keys = [&](const json& obj, const std::string& where,
                         std::initializer_list<const char*> keys) {
    if (!obj.is_object()) fail(where + " must be an object");
    if (obj.size() != keys.size()) fail(where + " has unexpected key count");
    for (const char* k : keys) {
      if (!obj.contains(k)) fail(where + " lacks \"" + k + "\"");
    }
  };
  expect_keys(report, "report", {"config", "calibration", "score", "trajectory_stats", "version", "timestamp"});
  if (!report["version"].is_string()) fail("version must be a string");
  if (!report["timestamp"].is_string()) fail("timestamp must be a string");
  expect_keys(report["config"], "config", {"settings", "inputs"});

  const auto& cal = report["calibration"];
  expect_keys(cal, "calibration",
              {"homography", "keypoint_count", "average_error_px", "accumulated_error_px",
               "per_point_errors_px", "max_average_error_px", "leave_one_out"});
  if (!cal["homography"].is_array() || cal["homography"].size() != 3) fail("homography must be 3x3");

  const auto& score = report["score"];
  expect_keys(score, "score",
              {"path_similarity_percent", "distance_px", "metric", "clamped", "completion_seconds",
               "failure_events", "baseline_px", "clamp_delta_px", "reference_reversed",
               "required_laps", "scored_samples", "window_start_s", "window_end_s"});
  const double s = score["path_similarity_percent"].get<double>();
  if (!(s >= 0.0 && s <= 100.0)) fail("path_similarity_percent outside [0, 100]");
  const bool dnf = std::any_of(score["failure_events"].begin(), score["failure_events"].end(),
                               [](const json& e) { return e.at("kind") == "DidNotFinish"; });
  if (dnf != score["completion_seconds"].is_null()) {
    fail("completion_seconds must be null exactly when a DidNotFinish event exists");
  }
  for (const auto& e : score["failure_events"]) {
    expect_keys(e, "failure event", {"time_s", "kind", "duration_s", "detail"});
  }
  expect_keys(report["trajectory_stats"], "trajectory_stats",
              {"sample_count", "gap_count", "gap_frames", "duration_s", "first_frame", "last_frame", "fps"});
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

json input_entry(const BenchmarkConfig& c, const fs::path& p) {
  return {{"path", p.generic_string()}, {"sha256", sha256_file(c.resolve(p))}};
}

}  // namespace

BenchmarkRun run_benchmark(const BenchmarkConfig& config) {
  BenchmarkRun run;

  run.track = stage("track", [&] { return load_image(config.resolve(config.track_image)); });
  run.reference = stage("track", [&] {
    if (config.reference_path) return load_reference_path(config.resolve(*config.reference_path));
    return extract_reference_path(run.track, config.track);
  });

  const KeypointSet keypoints =
      stage("calibration", [&] { return load_keypoints(config.resolve(config.keypoints)); });
  json loo = nullptr;
  stage("calibration", [&] {
    run.homography = estimate_homography(keypoints);
    run.calibration = reprojection_diagnostics(run.homography, keypoints);
    if (config.max_average_error_px && run.calibration.average_error > *config.max_average_error_px) {
      std::ostringstream msg;
      msg << "average reprojection error " << run.calibration.average_error
          << " px exceeds calibration.max_average_error_px = " << *config.max_average_error_px
          << "; refine or add keypoints";
      throw Error(ErrorKind::CalibrationGate, msg.str());
    }
    if (keypoints.size() >= 5) {
      try {
        loo = diagnostics_to_json(leave_one_out_diagnostics(keypoints.pairs()));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateConfiguration) throw;
      }
    }
    return 0;
  });

  const CameraTrajectory camera = stage("detections", [&] {
    std::vector<DetectionRecord> records;
    if (config.detections_path) {
      std::ifstream in(config.resolve(*config.detections_path));
      if (!in) throw Error(ErrorKind::FileNotFound, "cannot open detections file");
      records = parse_detections(in);
    } else {
      records = run_external_detector(*config.detector_command, *config.detector_frames);
    }
    return build_trajectory(records, config.fps, config.min_confidence);
  });

  run.trajectory = stage("transform", [&] {
    return smooth_trajectory(transform_trajectory(camera, run.homography), config.smoothing_window);
  });

  run.score = stage("metrics", [&] {
    const TrialScoringOptions options{
        .similarity = config.similarity,
        .start_line = StartLine(config.start_a, config.start_b, config.min_crossing_interval_s),
        .required_laps = config.required_laps,
        .corridor_px = config.corridor_px,
        .min_offtrack_s = config.min_offtrack_s,
        .direction_auto = config.direction_auto,
    };
    return score_trial(run.trajectory, run.reference, options);
  });

  stage("report", [&] {
    json inputs = {{"track_image", input_entry(config, config.track_image)},
                   {"keypoints", input_entry(config, config.keypoints)}};
    if (config.reference_path) inputs["reference_path"] = input_entry(config, *config.reference_path);
    if (config.detections_path) inputs["detections"] = input_entry(config, *config.detections_path);
    if (config.detector_command) {
      inputs["detector"] = {{"command", *config.detector_command}, {"frames", *config.detector_frames}};
    }

    json cal = diagnostics_to_json(run.calibration);
    cal["homography"] = homography_to_json(run.homography);
    cal["max_average_error_px"] =
        config.max_average_error_px ? json(*config.max_average_error_px) : json(nullptr);
    cal["leave_one_out"] = loo;

    const auto& ts = run.score;
    json score = score_to_json(ts.score);
    score["baseline_px"] = config.similarity.baseline;
    score["clamp_delta_px"] =
        config.similarity.clamp_delta ? json(*config.similarity.clamp_delta) : json(nullptr);
    score["reference_reversed"] = ts.reference_reversed;
    score["required_laps"] = config.required_laps;
    score["scored_samples"] = ts.scored_samples;
    score["window_start_s"] = ts.window_start;
    score["window_end_s"] = ts.window_end;

    std::int64_t gap_frames = 0;
    for (const auto& g : run.trajectory.gaps) gap_frames += g.end_frame - g.start_frame + 1;
    json stats = {{"sample_count", run.trajectory.samples.size()},
                  {"gap_count", run.trajectory.gaps.size()},
                  {"gap_frames", gap_frames},
                  {"duration_s", run.trajectory.duration()},
                  {"first_frame", run.trajectory.samples.front().frame_index},
                  {"last_frame", run.trajectory.samples.back().frame_index},
                  {"fps", run.trajectory.fps}};

    run.report = {{"config", {{"settings", config.source}, {"inputs", std::move(inputs)}}},
                  {"calibration", std::move(cal)},
                  {"score", std::move(score)},
                  {"trajectory_stats", std::move(stats)},
                  {"version", kVersion},
                  {"timestamp", utc_timestamp()}};

    OverlayInputs overlay{&run.track, &run.reference, &run.trajectory,
                          StartLine(config.start_a, config.start_b, config.min_crossing_interval_s),
                          &keypoints, run.score.score.failure_events};
    run.overlay_svg = render_overlay(overlay);
    return 0;
  });
  return run;
}

void write_outputs(const BenchmarkRun& run, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  auto write_atomic = [&](const std::string& name, const std::string& content) {
    const fs::path tmp = output_dir / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
      out << content;
      if (!out) throw Error(ErrorKind::Io, "failed writing " + tmp.string());
    }
    fs::rename(tmp, output_dir / name);
  };
  write_atomic("report.json", run.report.dump(2) + "\n");
  write_atomic("overlay.svg", run.overlay_svg);
}

}  // namespace trackbench
