#include "trackbench/keypoints_io.hpp"

#include <fstream>

namespace trackbench {

using nlohmann::json;

namespace {

ImageSize size_from_json(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::MissingKey, std::string("missing key ") + key);
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be [width, height] integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

template <Frame F>
Point2<F> point_from_json(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorKind::InvalidConfig, std::string(what) + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

json keypoints_to_json(const KeypointSet& keypoints) {
  json pairs = json::array();
  for (const auto& p : keypoints.pairs()) {
    json entry = {{"camera", {p.camera.x(), p.camera.y()}}, {"twin", {p.twin.x(), p.twin.y()}}};
    if (p.label) entry["label"] = *p.label;
    pairs.push_back(std::move(entry));
  }
  return {{"image_size_camera", {keypoints.camera_size().width, keypoints.camera_size().height}},
          {"image_size_twin", {keypoints.twin_size().width, keypoints.twin_size().height}},
          {"pairs", std::move(pairs)}};
}

KeypointSet keypoints_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "keypoints document must be an object");
  KeypointSet set(size_from_json(j, "image_size_camera"), size_from_json(j, "image_size_twin"));
  if (!j.contains("pairs") || !j.at("pairs").is_array()) {
    throw Error(ErrorKind::MissingKey, "keypoints document needs a \"pairs\" array");
  }
  for (const auto& entry : j.at("pairs")) {
    if (!entry.contains("camera") || !entry.contains("twin")) {
      throw Error(ErrorKind::MissingKey, "each keypoint pair needs \"camera\" and \"twin\"");
    }
    KeypointPair pair{point_from_json<Frame::Camera>(entry.at("camera"), "camera"),
                      point_from_json<Frame::Twin>(entry.at("twin"), "twin"), std::nullopt};
    if (entry.contains("label") && !entry.at("label").is_null()) {
      pair.label = entry.at("label").get<std::string>();
    }
    set.add(std::move(pair));
  }
  return set;
}

KeypointSet load_keypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open keypoints file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, "keypoints file " + path.string() + ": " + e.what());
  }
  return keypoints_from_json(j);
}

void save_keypoints(const KeypointSet& keypoints, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write keypoints file " + path.string());
  out << keypoints_to_json(keypoints).dump(2) << "\n";
}

json diagnostics_to_json(const CalibrationDiagnostics& d) {
  return {{"average_error_px", d.average_error},
          {"accumulated_error_px", d.accumulated_error},
          {"per_point_errors_px", d.per_point_errors},
          {"keypoint_count", d.keypoint_count}};
}

json homography_to_json(const Homography& h) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({h.matrix()(r, 0), h.matrix()(r, 1), h.matrix()(r, 2)});
  }
  return rows;
}

}  // namespace trackbench
