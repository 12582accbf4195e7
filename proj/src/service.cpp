#include "trackbench/service.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include <httplib.h>

#include "trackbench/image.hpp"
#include "trackbench/keypoints_io.hpp"

namespace trackbench::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Response error_response(int status, std::string_view kind, const std::string& message) {
  return {status, {{"error", std::string(kind)}, {"message", message}}};
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TooFewPoints: return 409;
    case ErrorKind::IndexOutOfRange: return 404;
    default: return 400;
  }
}

Response from_error(const Error& e) { return error_response(status_for(e.kind()), to_string(e.kind()), e.what()); }

Response no_session() {
  return error_response(404, "NoSession", "no active calibration session; POST /session first");
}

// Serves PNG sources verbatim and re-encodes anything else.
ImageBytes png_bytes(const fs::path& path, ImageSize& size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot read image " + path.string());
  std::string raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
  const GrayImage img = decode_image(bytes);
  size = {img.width, img.height};
  if (raw.size() >= 8 && raw.compare(1, 3, "PNG") == 0) return {"image/png", std::move(raw)};
  const auto png = encode_png(img);
  return {"image/png", std::string(png.begin(), png.end())};
}

std::string new_session_id() {
  std::random_device rd;
  std::uniform_int_distribution<unsigned> dist(0, 15);
  static constexpr char hex[] = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 16; ++i) id += hex[dist(rd)];
  return id;
}

template <Frame F>
Point2<F> parse_point(const json& body, const char* key) {
  if (!body.contains(key)) throw Error(ErrorKind::MissingKey, std::string("missing \"") + key + "\"");
  const auto& v = body.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorKind::InvalidArgument, std::string(key) + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

Response CalibrationService::start_session(const fs::path& camera_path, const fs::path& twin_path) {
  try {
    ImageSize camera_size, twin_size;
    ImageBytes camera = png_bytes(camera_path, camera_size);
    ImageBytes twin = png_bytes(twin_path, twin_size);
    std::lock_guard lock(mutex_);
    session_.emplace(Session{new_session_id(), camera_path, twin_path, std::move(camera),
                             std::move(twin), KeypointSet(camera_size, twin_size)});
    return {200,
            {{"session_id", session_->id},
             {"image_size_camera", {camera_size.width, camera_size.height}},
             {"image_size_twin", {twin_size.width, twin_size.height}}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

json CalibrationService::diagnostics_body() const {
  const auto& kp = session_->keypoints;
  json body = {{"count", kp.size()}};
  if (kp.size() < 4) {
    body["status"] = "pending";
    return body;
  }
  try {
    const Homography h = estimate_homography(kp);
    body["status"] = "ok";
    body["homography"] = homography_to_json(h);
    body["diagnostics"] = diagnostics_to_json(reprojection_diagnostics(h, kp));
    body["leave_one_out"] =
        kp.size() >= 5 ? diagnostics_to_json(leave_one_out_diagnostics(kp.pairs())) : json(nullptr);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateConfiguration) throw;
    body = {{"count", kp.size()}, {"status", "degenerate"}, {"message", e.what()}};
  }
  return body;
}

Response CalibrationService::session() const {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  json body = keypoints_to_json(session_->keypoints);
  body["session_id"] = session_->id;
  body["camera_path"] = session_->camera_path.string();
  body["twin_path"] = session_->twin_path.string();
  body["calibration"] = diagnostics_body();
  return {200, std::move(body)};
}

Response CalibrationService::add_keypoint(const json& body) {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  try {
    if (!body.is_object()) throw Error(ErrorKind::InvalidArgument, "body must be a JSON object");
    KeypointPair pair{parse_point<Frame::Camera>(body, "camera"), parse_point<Frame::Twin>(body, "twin"),
                      std::nullopt};
    if (body.contains("label") && body.at("label").is_string()) pair.label = body.at("label").get<std::string>();
    session_->keypoints.add(std::move(pair));
    return {200, diagnostics_body()};
  } catch (const Error& e) {
    return from_error(e);
  }
}

Response CalibrationService::remove_keypoint(std::size_t index) {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  try {
    session_->keypoints.remove(index);
    return {200, diagnostics_body()};
  } catch (const Error& e) {
    return from_error(e);
  }
}

Response CalibrationService::diagnostics() const {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  return {200, diagnostics_body()};
}

Response CalibrationService::error_curve() const {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  try {
    json entries = json::array();
    for (const auto& e : keypoint_error_curve(session_->keypoints, 4)) {
      entries.push_back({{"keypoint_count", e.keypoint_count},
                         {"average_error_px", e.diagnostics.average_error},
                         {"accumulated_error_px", e.diagnostics.accumulated_error},
                         {"scored_points", e.diagnostics.keypoint_count}});
    }
    return {200, {{"count", session_->keypoints.size()}, {"curve", std::move(entries)}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

Response CalibrationService::export_keypoints(const fs::path& path) const {
  std::lock_guard lock(mutex_);
  if (!session_) return no_session();
  if (session_->keypoints.size() < 4) {
    return error_response(409, "TooFewPoints", "export needs at least 4 keypoint pairs");
  }
  try {
    save_keypoints(session_->keypoints, path);
    return {200, {{"path", path.string()}, {"count", session_->keypoints.size()}}};
  } catch (const Error& e) {
    return error_response(400, to_string(e.kind()), e.what());
  }
}

std::optional<ImageBytes> CalibrationService::image(Frame which) const {
  std::lock_guard lock(mutex_);
  if (!session_) return std::nullopt;
  return which == Frame::Camera ? session_->camera_png : session_->twin_png;
}

// ---------------------------------------------------------------------------
// HTTP adapter

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json; charset=utf-8");
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    reply(res, error_response(400, "InvalidJson", e.what()));
    return std::nullopt;
  }
}

}  // namespace

void mount(httplib::Server& server, CalibrationService& service) {
  server.Post("/session", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object() || !(*body).contains("camera_path") || !(*body).contains("twin_path") ||
        !(*body)["camera_path"].is_string() || !(*body)["twin_path"].is_string()) {
      reply(res, error_response(400, "MissingKey", "body needs string camera_path and twin_path"));
      return;
    }
    reply(res, service.start_session((*body)["camera_path"].get<std::string>(),
                                     (*body)["twin_path"].get<std::string>()));
  });
  server.Get("/session", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, service.session());
  });
  auto serve_image = [&](Frame which) {
    return [&service, which](const httplib::Request&, httplib::Response& res) {
      const auto img = service.image(which);
      if (!img) {
        reply(res, no_session());
        return;
      }
      res.status = 200;
      res.set_content(img->bytes, img->content_type);
    };
  };
  server.Get("/image/camera", serve_image(Frame::Camera));
  server.Get("/image/twin", serve_image(Frame::Twin));
  server.Post("/keypoints", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (body) reply(res, service.add_keypoint(*body));
  });
  server.Delete(R"(/keypoints/(\d+))", [&](const httplib::Request& req, httplib::Response& res) {
    std::size_t index = 0;
    try {
      index = std::stoul(req.matches[1].str());
    } catch (const std::exception&) {
      reply(res, error_response(404, "IndexOutOfRange", "bad keypoint index"));
      return;
    }
    reply(res, service.remove_keypoint(index));
  });
  server.Get("/diagnostics", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, service.diagnostics());
  });
  server.Get("/error-curve", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, service.error_curve());
  });
  server.Post("/export", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object() || !(*body).contains("path") || !(*body)["path"].is_string()) {
      reply(res, error_response(400, "MissingKey", "body needs a string path"));
      return;
    }
    reply(res, service.export_keypoints((*body)["path"].get<std::string>()));
  });
}

void serve(CalibrationService& service, const std::string& host, int port) {
  httplib::Server server;
  mount(server, service);
  if (!server.listen(host, port)) {
    throw Error(ErrorKind::Io, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace trackbench::service
