#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "trackbench/geometry.hpp"

namespace trackbench {

// Keypoints file:
// {"image_size_camera":[w,h],"image_size_twin":[w,h],
//  "pairs":[{"camera":[x,y],"twin":[x,y],"label":"..."}]}
nlohmann::json keypoints_to_json(const KeypointSet& keypoints);
KeypointSet keypoints_from_json(const nlohmann::json& j);

KeypointSet load_keypoints(const std::filesystem::path& path);
void save_keypoints(const KeypointSet& keypoints, const std::filesystem::path& path);

nlohmann::json diagnostics_to_json(const CalibrationDiagnostics& d);
nlohmann::json homography_to_json(const Homography& h);

}  // namespace trackbench
