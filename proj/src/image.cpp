#include "trackbench/image.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <png.h>

namespace trackbench {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
  if (w <= 0 || h <= 0) throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
}

std::uint8_t rec601_luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::lround(std::min(255.0, y)));
}

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::ImageFormat, std::string("PNG decode failed: ") + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorKind::ImageFormat, std::string("PNG decode failed: ") + img.message);
  }
  GrayImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (color) {
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = rec601_luma(buffer[3 * i], buffer[3 * i + 1], buffer[3 * i + 2]);
    }
  } else {
    out.pixels = std::move(buffer);
  }
  return out;
}

// Minimal PGM tokenizer that skips '#' comments.
class PgmReader {
 public:
  explicit PgmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  long next_int() {
    skip_space();
    long v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      any = true;
      if (v > 1'000'000'000) throw Error(ErrorKind::ImageFormat, "PGM value too large");
    }
    if (!any) throw Error(ErrorKind::ImageFormat, "malformed PGM header");
    return v;
  }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  const bool binary = bytes[1] == '5';
  PgmReader r(bytes);
  const long w = r.next_int();
  const long h = r.next_int();
  const long maxval = r.next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorKind::ImageFormat, "invalid PGM dimensions or maxval");
  }
  GrayImage out(static_cast<int>(w), static_cast<int>(h));
  const std::size_t count = out.pixels.size();
  auto scale = [maxval](long v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(v) / maxval));
  };
  if (binary) {
    r.advance(1);  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() < r.pos() + count * bpp) throw Error(ErrorKind::ImageFormat, "truncated PGM");
    const std::uint8_t* data = bytes.data() + r.pos();
    for (std::size_t i = 0; i < count; ++i) {
      const long v = bpp == 1 ? data[i] : (data[2 * i] << 8) | data[2 * i + 1];
      out.pixels[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : scale(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.pixels[i] = scale(std::min(r.next_int(), maxval));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GrayImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    return decode_pgm(bytes);
  }
  throw Error(ErrorKind::ImageFormat, "unsupported image format (expected PNG or PGM)");
}

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, std::string("PNG encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

void save_png(const GrayImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

}  // namespace trackbench
