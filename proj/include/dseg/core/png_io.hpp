#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/core/raster.hpp"

namespace dseg {

namespace detail {

struct PngImageGuard {
  png_image img{};
  PngImageGuard() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImageGuard() { png_image_free(&img); }
  PngImageGuard(const PngImageGuard&) = delete;
  PngImageGuard& operator=(const PngImageGuard&) = delete;
};

inline std::vector<std::uint8_t> read_png(const std::filesystem::path& path, std::uint32_t format, int& h, int& w) {
  PngImageGuard g;
  if (!png_image_begin_read_from_file(&g.img, path.string().c_str()))
    throw load_error("cannot read PNG '" + path.string() + "': " + g.img.message);
  g.img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(g.img));
  if (!png_image_finish_read(&g.img, nullptr, buf.data(), 0, nullptr))
    throw load_error("cannot decode PNG '" + path.string() + "': " + g.img.message);
  h = static_cast<int>(g.img.height);
  w = static_cast<int>(g.img.width);
  return buf;
}

inline void write_png(const std::filesystem::path& path, std::uint32_t format, int h, int w,
                      const std::vector<std::uint8_t>& buf) {
  PngImageGuard g;
  g.img.format = format;
  g.img.width = static_cast<png_uint_32>(w);
  g.img.height = static_cast<png_uint_32>(h);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&g.img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw error("cannot write PNG '" + path.string() + "': " + g.img.message);
}

}  // namespace detail

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// 8-bit RGB -> [0,1] by exact division by 255.
inline Image load_image_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_RGB, h, w);
  Image img(h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

inline void save_image_png(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.data[i]);
  detail::write_png(path, PNG_FORMAT_RGB, img.height, img.width, buf);
}

/// Grayscale mask with values strictly in {0,255}; anything else is rejected.
inline Mask load_mask_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_GRAY, h, w);
  Mask m(h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    if (buf[i] != 0 && buf[i] != 255)
      throw load_error("mask '" + path.string() + "' contains illegal value " + std::to_string(buf[i]));
    m.data[i] = buf[i] == 255 ? 1 : 0;
  }
  return m;
}

inline void save_mask_png(const std::filesystem::path& path, const Mask& m) {
  std::vector<std::uint8_t> buf(m.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = m.data[i] ? 255 : 0;
  detail::write_png(path, PNG_FORMAT_GRAY, m.height, m.width, buf);
}

}  // namespace dseg
