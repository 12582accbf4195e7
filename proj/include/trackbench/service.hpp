#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbench/geometry.hpp"

namespace httplib {
class Server;
}

namespace trackbench::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct ImageBytes {
  std::string content_type;
  std::string bytes;
};

// Single-session keypoint calibration state. Every method is serialized on an
// internal mutex; the HTTP layer is a thin adapter over these calls.
class CalibrationService {
 public:
  Response start_session(const std::filesystem::path& camera_path,
                         const std::filesystem::path& twin_path);
  Response session() const;
  Response add_keypoint(const nlohmann::json& body);
  Response remove_keypoint(std::size_t index);
  Response diagnostics() const;
  Response error_curve() const;
  Response export_keypoints(const std::filesystem::path& path) const;
  std::optional<ImageBytes> image(Frame which) const;

 private:
  struct Session {
    std::string id;
    std::filesystem::path camera_path;
    std::filesystem::path twin_path;
    ImageBytes camera_png;
    ImageBytes twin_png;
    KeypointSet keypoints;
  };

  nlohmann::json diagnostics_body() const;  // caller holds the lock

  mutable std::mutex mutex_;
  std::optional<Session> session_;
};

// Registers the HTTP routes on `server`.
void mount(httplib::Server& server, CalibrationService& service);

// Blocks serving on host:port until the process is stopped.
void serve(CalibrationService& service, const std::string& host, int port);

}  // namespace trackbench::service
