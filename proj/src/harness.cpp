#include "trackbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "trackbench/json_reader.hpp"
#include "trackbench/keypoints_io.hpp"

namespace trackbench::sim {

using nlohmann::json;

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

// ---------------------------------------------------------------------------
// Camera

void CameraPose::validate() const {
  if (!(height_m > 0.0)) throw Error(ErrorKind::InvalidConfig, "camera height must be > 0");
  if (!(pitch_deg > 0.0 && pitch_deg < 90.0)) {
    throw Error(ErrorKind::InvalidConfig, "camera pitch must lie in (0, 90) degrees");
  }
  if (!(focal_length_px > 0.0)) throw Error(ErrorKind::InvalidConfig, "focal length must be > 0");
  if (!(ground_scale > 0.0)) throw Error(ErrorKind::InvalidConfig, "ground scale must be > 0");
  if (image_size.width <= 0 || image_size.height <= 0) {
    throw Error(ErrorKind::InvalidConfig, "camera image size must be positive");
  }
}

Eigen::Matrix3d plane_homography(const CameraPose& pose) {
  pose.validate();
  const double p = pose.pitch_deg * std::numbers::pi / 180.0;
  const double sp = std::sin(p), cp = std::cos(p);
  const double h = pose.height_m;
  const double s = pose.ground_scale;
  const double ahead = h * cp / sp;  // ground distance from camera foot to target

  // Twin pixels -> ground meters (X right, Y away from the camera).
  Eigen::Matrix3d twin_to_ground;
  twin_to_ground << 1.0 / s, 0.0, -pose.target.x() / s,
                    0.0, -1.0 / s, pose.target.y() / s + ahead,
                    0.0, 0.0, 1.0;

  // Rows are the camera axes (right, down, forward) in world coordinates;
  // the plane Z = 0 seen from (0, 0, h) maps through [r1 r2 -h*r3].
  Eigen::Matrix3d ground_to_cam;
  ground_to_cam << 1.0, 0.0, 0.0,
                   0.0, -sp, h * cp,
                   0.0, cp, h * sp;

  Eigen::Matrix3d k;
  k << pose.focal_length_px, 0.0, pose.image_size.width / 2.0,
       0.0, pose.focal_length_px, pose.image_size.height / 2.0,
       0.0, 0.0, 1.0;

  return normalize_homography_matrix(k * ground_to_cam * twin_to_ground);
}

Homography camera_to_twin(const CameraPose& pose) {
  return Homography::from_matrix(plane_homography(pose).inverse());
}

CameraPoint project_to_camera(const Eigen::Matrix3d& twin_to_camera, const TwinPoint& p) {
  const Eigen::Vector3d q = twin_to_camera * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (!(q.z() > 1e-12)) {
    throw Error(ErrorKind::PointAtInfinity, "twin point is behind or level with the camera");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

KeypointSet make_keypoints(const CameraPose& pose, ImageSize twin_size, std::size_t count,
                           double camera_noise_px, std::uint64_t seed) {
  const Eigen::Matrix3d h = plane_homography(pose);
  Rng rng(seed);
  KeypointSet set(pose.image_size, twin_size);
  const double mx = 0.05 * twin_size.width, my = 0.05 * twin_size.height;
  std::size_t attempts = 0;
  while (set.size() < count) {
    if (++attempts > 100000) {
      throw Error(ErrorKind::InvalidConfig, "camera sees too little of the twin to place keypoints");
    }
    const TwinPoint twin(std::round(rng.uniform(mx, twin_size.width - mx)),
                         std::round(rng.uniform(my, twin_size.height - my)));
    const Eigen::Vector3d q = h * Eigen::Vector3d(twin.x(), twin.y(), 1.0);
    if (!(q.z() > 1e-12)) continue;
    double cx = q.x() / q.z(), cy = q.y() / q.z();
    if (camera_noise_px > 0.0) {
      cx += camera_noise_px * rng.normal();
      cy += camera_noise_px * rng.normal();
    }
    const CameraPoint cam(cx, cy);
    if (!pose.image_size.contains(cam)) continue;
    bool duplicate = false;
    for (const auto& pair : set.pairs()) duplicate = duplicate || pair.camera == cam || pair.twin == twin;
    if (duplicate) continue;
    set.add({cam, twin, "kp" + std::to_string(set.size() + 1)});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Paths

namespace {

TwinPoint shape_point(const PathSpec& spec, double theta) {
  const double cx = spec.center.x(), cy = spec.center.y();
  if (spec.shape == PathShape::Oval) {
    return {cx + spec.semi_x * std::cos(theta), cy + spec.semi_y * std::sin(theta)};
  }
  return {cx + spec.semi_x * std::sin(theta), cy + spec.semi_y * std::sin(2.0 * theta)};
}

std::vector<TwinPoint> dense_shape(const PathSpec& spec) {
  const double extent = std::max(spec.semi_x, spec.semi_y);
  const auto n = static_cast<std::size_t>(std::max(2000.0, 40.0 * extent));
  std::vector<TwinPoint> pts;
  pts.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    pts.push_back(shape_point(spec, 2.0 * std::numbers::pi * static_cast<double>(i) / n));
  }
  return pts;
}

}  // namespace

ReferencePath sample_path(const PathSpec& spec, std::size_t count) {
  const auto dense = dense_shape(spec);
  std::vector<double> cum(dense.size(), 0.0);
  for (std::size_t i = 1; i < dense.size(); ++i) cum[i] = cum[i - 1] + distance(dense[i - 1], dense[i]);
  const double total = cum.back();
  std::vector<TwinPoint> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(count);
    while (seg + 2 < dense.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out.emplace_back(dense[seg].x() + t * (dense[seg + 1].x() - dense[seg].x()),
                     dense[seg].y() + t * (dense[seg + 1].y() - dense[seg].y()));
  }
  return ReferencePath::make(std::move(out), true);
}

GrayImage render_track(const PathSpec& spec, ImageSize size, int stroke_width_px) {
  GrayImage img(size.width, size.height, 0);
  const double r = stroke_width_px / 2.0;
  const int reach = static_cast<int>(std::ceil(r)) + 1;
  for (const auto& p : dense_shape(spec)) {
    const int px = static_cast<int>(std::floor(p.x())), py = static_cast<int>(std::floor(p.y()));
    for (int y = py - reach; y <= py + reach; ++y) {
      for (int x = px - reach; x <= px + reach; ++x) {
        if (x < 0 || y < 0 || x >= size.width || y >= size.height) continue;
        if (std::hypot(x + 0.5 - p.x(), y + 0.5 - p.y()) <= r) img.at(x, y) = 255;
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Scenario

void SimScenario::validate() const {
  camera.validate();
  if (!(lap_time > 0.0)) throw Error(ErrorKind::InvalidConfig, "lap_time_s must be > 0");
  if (!(fps > 0.0)) throw Error(ErrorKind::InvalidConfig, "fps must be > 0");
  if (laps < 1) throw Error(ErrorKind::InvalidConfig, "laps must be >= 1");
  if (!(noise_sigma_px >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise_sigma_px must be >= 0");
  if (stroke_width_px < 5) throw Error(ErrorKind::InvalidConfig, "stroke_width_px must be >= 5");
  if (keypoint_count < 4) throw Error(ErrorKind::InvalidConfig, "keypoint_count must be >= 4");
  if (!(baseline_px > 0.0)) throw Error(ErrorKind::InvalidConfig, "baseline_px must be > 0");
  const double frames = lap_time * fps;
  if (std::abs(frames - std::round(frames)) > 1e-9 || std::round(frames) < 20) {
    throw Error(ErrorKind::InvalidConfig,
                "lap_time_s * fps must be a whole number of frames (>= 20)");
  }
}

std::size_t SimScenario::frames_per_lap() const {
  return static_cast<std::size_t>(std::llround(lap_time * fps));
}

SimScenario scenario_from_json(const json& j) {
  ObjectReader root(j, "");
  SimScenario s;
  if (auto path = root.optional_object("path")) {
    const std::string shape = path->string("shape");
    if (shape == "oval") s.path.shape = PathShape::Oval;
    else if (shape == "figure_eight") s.path.shape = PathShape::FigureEight;
    else throw Error(ErrorKind::InvalidConfig, "path.shape must be \"oval\" or \"figure_eight\"");
    if (const auto* c = path->optional("center")) {
      s.path.center = TwinPoint((*c).at(0).get<double>(), (*c).at(1).get<double>());
    }
    if (const auto* a = path->optional("semi_axes")) {
      s.path.semi_x = (*a).at(0).get<double>();
      s.path.semi_y = (*a).at(1).get<double>();
    }
    path->finish();
  }
  s.lap_time = root.number("lap_time_s", s.lap_time);
  s.fps = root.number("fps", s.fps);
  s.laps = static_cast<int>(root.integer("laps", s.laps));
  s.noise_sigma_px = root.number("noise_sigma_px", s.noise_sigma_px);
  s.seed = static_cast<std::uint64_t>(root.integer("seed", static_cast<long long>(s.seed)));
  if (auto cam = root.optional_object("camera")) {
    s.camera.height_m = cam->number("height_m", s.camera.height_m);
    s.camera.pitch_deg = cam->number("pitch_deg", s.camera.pitch_deg);
    s.camera.focal_length_px = cam->number("focal_length_px", s.camera.focal_length_px);
    s.camera.ground_scale = cam->number("ground_scale_px_per_m", s.camera.ground_scale);
    if (const auto* sz = cam->optional("image_size")) {
      s.camera.image_size = {(*sz).at(0).get<int>(), (*sz).at(1).get<int>()};
    }
    if (const auto* t = cam->optional("target")) {
      s.camera.target = TwinPoint((*t).at(0).get<double>(), (*t).at(1).get<double>());
    }
    cam->finish();
  }
  if (const auto* sz = root.optional("twin_image_size")) {
    s.twin_size = {(*sz).at(0).get<int>(), (*sz).at(1).get<int>()};
  }
  s.stroke_width_px = static_cast<int>(root.integer("stroke_width_px", s.stroke_width_px));
  s.keypoint_count = static_cast<std::size_t>(root.integer("keypoint_count", 8));
  s.keypoint_noise_px = root.number("keypoint_noise_px", s.keypoint_noise_px);
  s.baseline_px = root.number("baseline_px", s.baseline_px);
  root.optional("output_dir");  // consumed by the CLI
  root.finish();
  s.validate();
  return s;
}

TrialScoringOptions scoring_options(const SimScenario& s, const StartLine& line) {
  return TrialScoringOptions{
      .similarity = {Metric::Dtw, std::nullopt, s.baseline_px},
      .start_line = line,
      .required_laps = s.laps,
      .corridor_px = 40.0,
      .min_offtrack_s = 0.5,
      .direction_auto = true,
  };
}

SimFixture simulate_trial(const SimScenario& s) {
  s.validate();
  const std::size_t per_lap = s.frames_per_lap();
  const ReferencePath reference = sample_path(s.path, per_lap);
  const Eigen::Matrix3d h = plane_homography(s.camera);

  // Start line across the path between vertices k and k+1.
  const std::size_t k = per_lap / 10;
  const TwinPoint& p0 = reference.points[k];
  const TwinPoint& p1 = reference.points[k + 1];
  const double tx = p1.x() - p0.x(), ty = p1.y() - p0.y();
  const double tlen = std::hypot(tx, ty);
  const double half = 3.0 * s.stroke_width_px;
  const TwinPoint mid((p0.x() + p1.x()) / 2.0, (p0.y() + p1.y()) / 2.0);
  const TwinPoint na(mid.x() - ty / tlen * half, mid.y() + tx / tlen * half);
  const TwinPoint nb(mid.x() + ty / tlen * half, mid.y() - tx / tlen * half);
  const StartLine line(na, nb, std::min(1.0, s.lap_time / 4.0));

  const std::size_t frames = k + 1 + per_lap * static_cast<std::size_t>(s.laps) + per_lap / 10;
  TwinTrajectory truth;
  truth.fps = s.fps;
  CameraTrajectory camera;
  camera.fps = s.fps;
  Rng rng(s.seed);
  std::ostringstream jsonl;
  for (std::size_t f = 0; f < frames; ++f) {
    const auto frame = static_cast<std::int64_t>(f);
    const double time = static_cast<double>(f) / s.fps;
    const TwinPoint& twin = reference.points[f % per_lap];
    truth.samples.push_back({frame, time, twin});
    CameraPoint cam = project_to_camera(h, twin);
    if (s.noise_sigma_px > 0.0) {
      const double nx = s.noise_sigma_px * rng.normal();
      const double ny = s.noise_sigma_px * rng.normal();
      cam = CameraPoint(cam.x() + nx, cam.y() + ny);
    }
    camera.samples.push_back({frame, time, cam});
    const json record = {{"frame_index", frame},
                         {"bbox", {cam.x() - 15.0, cam.y() - 10.0, cam.x() + 15.0, cam.y() + 10.0}},
                         {"centroid", {cam.x(), cam.y()}},
                         {"confidence", 1.0}};
    jsonl << record.dump() << "\n";
  }

  SimFixture fx{
      .track = render_track(s.path, s.twin_size, s.stroke_width_px),
      .reference = reference,
      .keypoints = make_keypoints(s.camera, s.twin_size, s.keypoint_count, s.keypoint_noise_px,
                                  s.seed ^ 0x9e3779b97f4a7c15ULL),
      .detections_jsonl = jsonl.str(),
      .truth_trajectory = truth,
      .camera_trajectory = camera,
      .start_line = line,
      .truth = {},
      .twin_to_camera = h,
  };
  fx.truth = score_trial(truth, reference, scoring_options(s, line));
  return fx;
}

void write_fixture(const SimFixture& fx, const SimScenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_png(fx.track, dir / "track.png");
  save_reference_path(fx.reference, dir / "ref_path.json");
  save_keypoints(fx.keypoints, dir / "keypoints.json");
  {
    std::ofstream out(dir / "detections.jsonl");
    if (!out) throw Error(ErrorKind::Io, "cannot write detections.jsonl");
    out << fx.detections_jsonl;
  }
  {
    const auto& sc = fx.truth.score;
    json truth = {
        {"path_similarity_percent", sc.similarity_percent},
        {"distance_px", sc.distance.distance},
        {"completion_seconds", sc.completion_seconds ? json(*sc.completion_seconds) : json(nullptr)},
        {"lap_time_s", s.lap_time},
        {"laps", s.laps},
        {"noise_sigma_px", s.noise_sigma_px},
        {"seed", s.seed},
        {"twin_to_camera", json::array()},
    };
    for (int r = 0; r < 3; ++r) {
      truth["twin_to_camera"].push_back(
          {fx.twin_to_camera(r, 0), fx.twin_to_camera(r, 1), fx.twin_to_camera(r, 2)});
    }
    std::ofstream out(dir / "truth.json");
    out << truth.dump(2) << "\n";
  }
  {
    json config = {
        {"_comment", "generated by trackbench simulate"},
        {"track", {{"image", "track.png"}, {"reference_path", "ref_path.json"}}},
        {"calibration", {{"keypoints", "keypoints.json"}}},
        {"detections", {{"path", "detections.jsonl"}, {"min_confidence", 0.25}}},
        {"fps", s.fps},
        {"metric",
         {{"kind", "dtw"}, {"baseline_px", s.baseline_px}, {"required_laps", s.laps},
          {"corridor_px", 40.0}, {"min_offtrack_s", 0.5}}},
        {"start_line",
         {{"a", {fx.start_line.a.x(), fx.start_line.a.y()}},
          {"b", {fx.start_line.b.x(), fx.start_line.b.y()}},
          {"min_crossing_interval_s", fx.start_line.min_crossing_interval}}},
        {"output_dir", "out"},
    };
    std::ofstream out(dir / "config.json");
    out << config.dump(2) << "\n";
  }
}

}  // namespace trackbench::sim
