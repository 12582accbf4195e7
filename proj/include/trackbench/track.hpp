#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trackbench/geometry.hpp"
#include "trackbench/image.hpp"

namespace trackbench {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // 0 or 1, row-major

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           cells[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) { cells[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

class BranchingSkeletonError : public Error {
 public:
  explicit BranchingSkeletonError(std::vector<Pixel> branches);
  const std::vector<Pixel>& branch_pixels() const { return branches_; }

 private:
  std::vector<Pixel> branches_;
};

class DisconnectedSkeletonError : public Error {
 public:
  explicit DisconnectedSkeletonError(std::size_t components);
  std::size_t component_count() const { return components_; }

 private:
  std::size_t components_;
};

struct ReferencePath {
  std::vector<TwinPoint> points;
  bool closed = false;
  double arc_length = 0.0;
  std::size_t resample_count = 0;

  // Builds a path, validating that it has >= 2 points with distinct neighbours.
  static ReferencePath make(std::vector<TwinPoint> points, bool closed);

  ReferencePath reversed() const;
};

struct TrackOptions {
  int threshold = 128;
  bool track_is_bright = true;
  std::size_t resample_count = 512;
};

double polyline_length(const std::vector<TwinPoint>& points, bool closed);

BinaryMask binarize(const GrayImage& image, int threshold, bool track_is_bright);

// Zhang-Suen thinning followed by removal of redundant staircase pixels, so
// every interior pixel of a simple curve has exactly two 8-neighbours.
BinaryMask thin(const BinaryMask& mask);

// Plain Zhang-Suen iteration without the staircase cleanup.
BinaryMask zhang_suen(const BinaryMask& mask);

int neighbor_count(const BinaryMask& mask, int x, int y);
std::size_t component_count(const BinaryMask& mask);

ReferencePath trace_path(const BinaryMask& skeleton);

ReferencePath resample(const ReferencePath& path, std::size_t count);

// Full pipeline: binarize -> thin -> trace -> resample.
ReferencePath extract_reference_path(const GrayImage& image, const TrackOptions& options);

// {"closed":bool,"points":[[x,y],...]}
nlohmann::json reference_path_to_json(const ReferencePath& path);
ReferencePath reference_path_from_json(const nlohmann::json& j);
ReferencePath load_reference_path(const std::filesystem::path& path);
void save_reference_path(const ReferencePath& path, const std::filesystem::path& file);

// Euclidean distance from p to the nearest segment of the path.
double distance_to_path(const ReferencePath& path, const TwinPoint& p);

}  // namespace trackbench
