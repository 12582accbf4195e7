#include "trackbench/track.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

namespace trackbench {

using nlohmann::json;

namespace {

// Neighbour offsets in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<Pixel, 8> kRing = {{{0, -1}, {1, -1}, {1, 0}, {1, 1},
                                         {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

std::array<int, 8> ring_values(const BinaryMask& m, int x, int y) {
  std::array<int, 8> v{};
  for (std::size_t k = 0; k < 8; ++k) v[k] = m.get(x + kRing[k].x, y + kRing[k].y) ? 1 : 0;
  return v;
}

int transitions(const std::array<int, 8>& v) {
  int a = 0;
  for (std::size_t k = 0; k < 8; ++k) a += (v[k] == 0 && v[(k + 1) % 8] == 1) ? 1 : 0;
  return a;
}

// Yokoi 8-connectivity number; 1 means removing the pixel keeps topology.
int yokoi_8(const std::array<int, 8>& v) {
  // Reindex to E, NE, N, NW, W, SW, S, SE (counter-clockwise from east).
  const std::array<int, 8> r = {v[2], v[1], v[0], v[7], v[6], v[5], v[4], v[3]};
  auto inv = [&](std::size_t k) { return 1 - r[k % 8]; };
  int c = 0;
  for (std::size_t k = 0; k < 8; k += 2) c += inv(k) - inv(k) * inv(k + 1) * inv(k + 2);
  return c;
}

std::string pixel_list(const std::vector<Pixel>& pixels) {
  std::ostringstream out;
  const std::size_t shown = std::min<std::size_t>(pixels.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    out << (i ? ", " : "") << "(" << pixels[i].x << ", " << pixels[i].y << ")";
  }
  if (pixels.size() > shown) out << ", ...";
  return out.str();
}

TwinPoint pixel_center(const Pixel& p) { return {p.x + 0.5, p.y + 0.5}; }

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

BranchingSkeletonError::BranchingSkeletonError(std::vector<Pixel> branches)
    : Error(ErrorKind::BranchingSkeleton,
            "skeleton has branch pixels at " + pixel_list(branches) +
                "; clean spurs from the track image or raise the threshold"),
      branches_(std::move(branches)) {}

DisconnectedSkeletonError::DisconnectedSkeletonError(std::size_t components)
    : Error(ErrorKind::DisconnectedSkeleton,
            "skeleton has " + std::to_string(components) +
                " separate components; the track must form one connected route"),
      components_(components) {}

// ---------------------------------------------------------------------------

double polyline_length(const std::vector<TwinPoint>& points, bool closed) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
  if (closed && points.size() > 1) total += distance(points.back(), points.front());
  return total;
}

ReferencePath ReferencePath::make(std::vector<TwinPoint> points, bool closed) {
  if (closed && points.size() > 2 && points.front() == points.back()) points.pop_back();
  if (points.size() < 2) {
    throw Error(ErrorKind::EmptySequence, "a reference path needs at least 2 points");
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] == points[i - 1]) {
      throw Error(ErrorKind::InvalidArgument,
                  "reference path has repeated consecutive point at index " + std::to_string(i));
    }
  }
  ReferencePath path;
  path.arc_length = polyline_length(points, closed);
  path.resample_count = points.size();
  path.points = std::move(points);
  path.closed = closed;
  return path;
}

ReferencePath ReferencePath::reversed() const {
  ReferencePath out = *this;
  std::reverse(out.points.begin(), out.points.end());
  return out;
}

BinaryMask binarize(const GrayImage& image, int threshold, bool track_is_bright) {
  BinaryMask mask(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const int v = image.pixels[i];
    mask.cells[i] = (track_is_bright ? v >= threshold : v <= threshold) ? 1 : 0;
  }
  if (mask.count() == 0) {
    throw Error(ErrorKind::EmptyMask,
                "no pixels pass the threshold; check track.threshold and track.is_bright");
  }
  return mask;
}

int neighbor_count(const BinaryMask& mask, int x, int y) {
  const auto v = ring_values(mask, x, y);
  return v[0] + v[1] + v[2] + v[3] + v[4] + v[5] + v[6] + v[7];
}

BinaryMask zhang_suen(const BinaryMask& mask) {
  BinaryMask m = mask;
  std::vector<std::size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
          if (!m.get(x, y)) continue;
          const auto p = ring_values(m, x, y);
          const int b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7];
          if (b < 2 || b > 6 || transitions(p) != 1) continue;
          // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
          const bool ok = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                    : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (ok) doomed.push_back(static_cast<std::size_t>(y) * m.width + x);
        }
      }
      for (auto i : doomed) m.cells[i] = 0;
      changed = changed || !doomed.empty();
    }
  }
  return m;
}

BinaryMask thin(const BinaryMask& mask) {
  BinaryMask m = zhang_suen(mask);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        if (!m.get(x, y)) continue;
        const auto v = ring_values(m, x, y);
        const int b = v[0] + v[1] + v[2] + v[3] + v[4] + v[5] + v[6] + v[7];
        if (b >= 2 && yokoi_8(v) == 1) {
          m.set(x, y, false);
          changed = true;
        }
      }
    }
  }
  return m;
}

namespace {

std::vector<std::vector<Pixel>> components(const BinaryMask& mask) {
  std::vector<std::uint8_t> seen(mask.cells.size(), 0);
  std::vector<std::vector<Pixel>> out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.cells[idx] || seen[idx]) continue;
      std::vector<Pixel> comp;
      std::deque<Pixel> queue{{x, y}};
      seen[idx] = 1;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        comp.push_back(p);
        for (const auto& d : kRing) {
          const int nx = p.x + d.x, ny = p.y + d.y;
          if (!mask.get(nx, ny)) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
          if (seen[nidx]) continue;
          seen[nidx] = 1;
          queue.push_back({nx, ny});
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

std::vector<Pixel> neighbors_of(const BinaryMask& mask, const Pixel& p) {
  std::vector<Pixel> out;
  for (const auto& d : kRing) {
    if (mask.get(p.x + d.x, p.y + d.y)) out.push_back({p.x + d.x, p.y + d.y});
  }
  return out;
}

bool yx_less(const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; }

}  // namespace

std::size_t component_count(const BinaryMask& mask) { return components(mask).size(); }

ReferencePath trace_path(const BinaryMask& skeleton) {
  const auto comps = components(skeleton);
  if (comps.empty()) throw Error(ErrorKind::EmptyMask, "skeleton is empty");
  if (comps.size() > 1) throw DisconnectedSkeletonError(comps.size());
  const auto& pixels = comps.front();
  if (pixels.size() < 2) {
    throw Error(ErrorKind::EmptySequence, "skeleton consists of a single pixel");
  }

  std::vector<Pixel> branches, endpoints;
  for (const auto& p : pixels) {
    const int n = neighbor_count(skeleton, p.x, p.y);
    if (n >= 3) branches.push_back(p);
    if (n == 1) endpoints.push_back(p);
  }
  if (!branches.empty()) {
    std::sort(branches.begin(), branches.end(), yx_less);
    throw BranchingSkeletonError(std::move(branches));
  }

  const bool closed = endpoints.empty();
  Pixel start;
  Pixel next;
  if (closed) {
    start = *std::min_element(pixels.begin(), pixels.end(), yx_less);
    auto nbrs = neighbors_of(skeleton, start);
    auto angle = [&](const Pixel& q) {
      double a = std::atan2(static_cast<double>(q.y - start.y), static_cast<double>(q.x - start.x));
      return a < 0 ? a + 2.0 * std::numbers::pi : a;
    };
    next = angle(nbrs[0]) <= angle(nbrs[1]) ? nbrs[0] : nbrs[1];
  } else {
    start = *std::min_element(endpoints.begin(), endpoints.end(), yx_less);
    next = neighbors_of(skeleton, start).front();
  }

  std::vector<TwinPoint> points{pixel_center(start)};
  Pixel prev = start, cur = next;
  while (!(cur == start)) {
    points.push_back(pixel_center(cur));
    const auto nbrs = neighbors_of(skeleton, cur);
    if (nbrs.size() == 1) break;  // reached the far endpoint
    const Pixel step = nbrs[0] == prev ? nbrs[1] : nbrs[0];
    prev = cur;
    cur = step;
  }
  return ReferencePath::make(std::move(points), closed);
}

ReferencePath resample(const ReferencePath& path, std::size_t count) {
  if (count < 2) throw Error(ErrorKind::InvalidArgument, "resample count must be at least 2");
  std::vector<TwinPoint> verts = path.points;
  if (path.closed) verts.push_back(path.points.front());
  std::vector<double> cum(verts.size(), 0.0);
  for (std::size_t i = 1; i < verts.size(); ++i) cum[i] = cum[i - 1] + distance(verts[i - 1], verts[i]);
  const double total = cum.back();
  const double spacing = total / static_cast<double>(path.closed ? count : count - 1);

  std::vector<TwinPoint> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!path.closed && i + 1 == count) {
      out.push_back(verts.back());
      break;
    }
    const double s = spacing * static_cast<double>(i);
    while (seg + 2 < verts.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    const TwinPoint& a = verts[seg];
    const TwinPoint& b = verts[seg + 1];
    out.emplace_back(a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y()));
  }
  ReferencePath r = ReferencePath::make(std::move(out), path.closed);
  r.resample_count = count;
  return r;
}

ReferencePath extract_reference_path(const GrayImage& image, const TrackOptions& options) {
  const BinaryMask skeleton = thin(binarize(image, options.threshold, options.track_is_bright));
  return resample(trace_path(skeleton), options.resample_count);
}

json reference_path_to_json(const ReferencePath& path) {
  json pts = json::array();
  for (const auto& p : path.points) pts.push_back({p.x(), p.y()});
  return {{"closed", path.closed}, {"points", std::move(pts)}};
}

ReferencePath reference_path_from_json(const json& j) {
  if (!j.is_object() || !j.contains("points") || !j.at("points").is_array()) {
    throw Error(ErrorKind::InvalidConfig, "reference path JSON needs a \"points\" array");
  }
  std::vector<TwinPoint> pts;
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(ErrorKind::InvalidConfig, "reference path points must be [x, y]");
    }
    pts.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return ReferencePath::make(std::move(pts), j.value("closed", false));
}

ReferencePath load_reference_path(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open reference path " + path.string());
  try {
    return reference_path_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

void save_reference_path(const ReferencePath& path, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  out << reference_path_to_json(path).dump() << "\n";
}

double distance_to_path(const ReferencePath& path, const TwinPoint& p) {
  const auto& v = path.points;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t segs = path.closed ? v.size() : v.size() - 1;
  for (std::size_t i = 0; i < segs; ++i) {
    const TwinPoint& a = v[i];
    const TwinPoint& b = v[(i + 1) % v.size()];
    const double dx = b.x() - a.x(), dy = b.y() - a.y();
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x() - a.x()) * dx + (p.y() - a.y()) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.x() - (a.x() + t * dx), p.y() - (a.y() + t * dy)));
  }
  return best;
}

}  // namespace trackbench
