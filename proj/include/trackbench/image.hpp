#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "trackbench/error.hpp"

namespace trackbench {

// Row-major 8-bit grayscale raster.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

// Reads PNG (any bit depth / color type) or binary/ASCII PGM. Color input is
// reduced to rec601 luma.
GrayImage load_image(const std::filesystem::path& path);
GrayImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const GrayImage& image);
void save_png(const GrayImage& image, const std::filesystem::path& path);
void save_pgm(const GrayImage& image, const std::filesystem::path& path);

std::uint8_t rec601_luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace trackbench
