#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "trackbench/geometry.hpp"
#include "trackbench/harness.hpp"
#include "trackbench/track.hpp"

namespace testing {

namespace tb = trackbench;
namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("trackbench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline std::vector<tb::TwinPoint> pts(std::initializer_list<std::pair<double, double>> xs) {
  std::vector<tb::TwinPoint> out;
  for (auto [x, y] : xs) out.emplace_back(x, y);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force path distance oracles: enumerate every monotone warping path
// (DTW) or order-preserving coupling (Frechet) from (0,0) to (n-1,m-1).

struct BruteResult {
  double distance = 0.0;
  bool clamped = false;
};

inline double local_cost(const tb::TwinPoint& a, const tb::TwinPoint& b, std::optional<double> delta,
                         bool* hit) {
  double c = std::hypot(a.x() - b.x(), a.y() - b.y());
  if (delta && c > *delta) {
    if (hit) *hit = true;
    return *delta;
  }
  return c;
}

template <class Visit>
void enumerate_paths(std::size_t n, std::size_t m, std::vector<std::pair<std::size_t, std::size_t>>& path,
                     Visit&& visit) {
  const auto [i, j] = path.back();
  if (i == n - 1 && j == m - 1) {
    visit(path);
    return;
  }
  static constexpr std::array<std::pair<int, int>, 3> steps{{{1, 0}, {0, 1}, {1, 1}}};
  for (auto [di, dj] : steps) {
    const std::size_t ni = i + di, nj = j + dj;
    if (ni >= n || nj >= m) continue;
    path.emplace_back(ni, nj);
    enumerate_paths(n, m, path, visit);
    path.pop_back();
  }
}

inline BruteResult brute_dtw(const std::vector<tb::TwinPoint>& x, const std::vector<tb::TwinPoint>& y,
                             std::optional<double> delta) {
  double best_sum = std::numeric_limits<double>::infinity();
  std::size_t best_len = 0;
  bool clamped = false;
  std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
  enumerate_paths(x.size(), y.size(), path, [&](const auto& p) {
    double sum = 0.0;
    bool hit = false;
    for (auto [i, j] : p) sum += local_cost(x[i], y[j], delta, &hit);
    if (sum < best_sum || (sum == best_sum && p.size() < best_len)) {
      best_sum = sum;
      best_len = p.size();
      clamped = hit;
    } else if (sum == best_sum && p.size() == best_len) {
      clamped = clamped || hit;
    }
  });
  return {best_sum / static_cast<double>(best_len), clamped};
}

inline BruteResult brute_frechet(const std::vector<tb::TwinPoint>& x, const std::vector<tb::TwinPoint>& y,
                                 std::optional<double> delta) {
  double best = std::numeric_limits<double>::infinity();
  double best_raw = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
  enumerate_paths(x.size(), y.size(), path, [&](const auto& p) {
    double worst = 0.0, worst_raw = 0.0;
    for (auto [i, j] : p) {
      worst = std::max(worst, local_cost(x[i], y[j], delta, nullptr));
      worst_raw = std::max(worst_raw, local_cost(x[i], y[j], std::nullopt, nullptr));
    }
    best = std::min(best, worst);
    best_raw = std::min(best_raw, worst_raw);
  });
  return {best, delta.has_value() && best_raw > *delta};
}

// ---------------------------------------------------------------------------
// Textbook Zhang-Suen on a character grid ('#' = foreground), written
// independently of the library's mask type.

inline std::vector<std::string> reference_zhang_suen(std::vector<std::string> g) {
  const int h = static_cast<int>(g.size());
  const int w = h ? static_cast<int>(g[0].size()) : 0;
  auto on = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && g[y][x] == '#'; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<std::pair<int, int>> kill;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!on(x, y)) continue;
          // P2..P9 clockwise from north.
          const int p[8] = {on(x, y - 1),     on(x + 1, y - 1), on(x + 1, y), on(x + 1, y + 1),
                            on(x, y + 1),     on(x - 1, y + 1), on(x - 1, y), on(x - 1, y - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            a += (!p[k] && p[(k + 1) % 8]);
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const bool c = pass == 0 ? !(p[0] && p[2] && p[4]) : !(p[0] && p[2] && p[6]);
          const bool d = pass == 0 ? !(p[2] && p[4] && p[6]) : !(p[0] && p[4] && p[6]);
          if (c && d) kill.emplace_back(x, y);
        }
      }
      for (auto [x, y] : kill) g[y][x] = '.';
      changed = changed || !kill.empty();
    }
  }
  return g;
}

inline tb::BinaryMask mask_from_grid(const std::vector<std::string>& g) {
  tb::BinaryMask m(static_cast<int>(g[0].size()), static_cast<int>(g.size()));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) m.set(x, y, g[y][x] == '#');
  return m;
}

inline std::vector<std::string> grid_from_mask(const tb::BinaryMask& m) {
  std::vector<std::string> g(m.height, std::string(m.width, '.'));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.get(x, y)) g[y][x] = '#';
  return g;
}

inline tb::BinaryMask annulus(int size, double cx, double cy, double r_in, double r_out) {
  tb::BinaryMask m(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      m.set(x, y, r >= r_in && r <= r_out);
    }
  }
  return m;
}

inline tb::BinaryMask filled_bar(int w, int h, int pad) {
  tb::BinaryMask m(w + 2 * pad, h + 2 * pad);
  for (int y = pad; y < pad + h; ++y)
    for (int x = pad; x < pad + w; ++x) m.set(x, y, true);
  return m;
}

// Breadth-first 8-connected component count, independent of the library.
inline std::size_t count_components(const tb::BinaryMask& m) {
  std::vector<char> seen(m.cells.size(), 0);
  std::size_t count = 0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.get(x, y) || seen[y * m.width + x]) continue;
      ++count;
      std::vector<std::pair<int, int>> stack{{x, y}};
      seen[y * m.width + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (m.get(nx, ny) && !seen[ny * m.width + nx]) {
              seen[ny * m.width + nx] = 1;
              stack.emplace_back(nx, ny);
            }
          }
      }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Geometry helpers

// Random well-conditioned homography: a perturbed similarity with a mild
// projective row.
inline Eigen::Matrix3d random_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const double angle = u(rng) * 3.14159;
    const double scale = 0.5 + 1.5 * std::abs(u(rng));
    Eigen::Matrix3d h;
    h << scale * std::cos(angle) + 0.2 * u(rng), -scale * std::sin(angle) + 0.2 * u(rng), 200.0 * u(rng),
        scale * std::sin(angle) + 0.2 * u(rng), scale * std::cos(angle) + 0.2 * u(rng), 200.0 * u(rng),
        4e-4 * u(rng), 4e-4 * u(rng), 1.0;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h);
    const double cond = svd.singularValues()(0) / svd.singularValues()(2);
    if (cond < 1e6) return h;
  }
}

inline Eigen::Matrix3d normalized(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d out = m / m.norm();
  if (out(2, 2) < 0) out = -out;
  return out;
}

inline std::array<double, 2> map_point(const Eigen::Matrix3d& h, double x, double y) {
  const Eigen::Vector3d v = h * Eigen::Vector3d(x, y, 1.0);
  return {v(0) / v(2), v(1) / v(2)};
}

// Exact correspondences for H inside a 640x480 camera image; points are kept
// only when they also land inside a 2000x2000 twin image.
inline tb::KeypointSet exact_keypoints(const Eigen::Matrix3d& h, std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(20.0, 620.0), uy(20.0, 460.0);
  tb::KeypointSet set({640, 480}, {2000, 2000});
  while (set.size() < count) {
    const double x = ux(rng), y = uy(rng);
    const auto t = map_point(h, x, y);
    if (t[0] < 0 || t[1] < 0 || t[0] > 2000 || t[1] > 2000) continue;
    set.add({tb::CameraPoint(x, y), tb::TwinPoint(t[0], t[1]), std::nullopt});
  }
  return set;
}

inline Eigen::Matrix3d random_offset_homography(std::mt19937_64& rng) {
  Eigen::Matrix3d h = random_homography(rng);
  // Shift so typical camera points land comfortably inside the twin frame.
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  const auto c = map_point(h, 320.0, 240.0);
  shift(0, 2) = 1000.0 - c[0];
  shift(1, 2) = 1000.0 - c[1];
  return shift * h;
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace testing
