#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dseg/core/error.hpp"

namespace dseg {

/// Row-major, channel-interleaved pixel grid. `Image` and `Mask` are the two
/// instantiations used throughout; geometry functions are written once over
/// both so masks follow exactly the same pixel mapping as their images.
template <typename T, int Channels>
struct Raster {
  using value_type = T;
  static constexpr int channels = Channels;

  int height = 0;
  int width = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int h, int w, T fill = T{}) : height(h), width(w) {
    if (h < 0 || w < 0) throw invalid_input("raster dimensions must be non-negative");
    data.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * Channels, fill);
  }

  [[nodiscard]] bool empty() const noexcept { return height == 0 || width == 0; }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::size_t index(int r, int c, int ch = 0) const noexcept {
    return (static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)) *
               Channels +
           static_cast<std::size_t>(ch);
  }
  T& at(int r, int c, int ch = 0) noexcept { return data[index(r, c, ch)]; }
  const T& at(int r, int c, int ch = 0) const noexcept { return data[index(r, c, ch)]; }

  std::span<T> pixel(int r, int c) noexcept { return {data.data() + index(r, c), Channels}; }
  std::span<const T> pixel(int r, int c) const noexcept { return {data.data() + index(r, c), Channels}; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// RGB intensities in [0,1].
using Image = Raster<float, 3>;
/// Binary labels, 1 = wound bed.
using Mask = Raster<std::uint8_t, 1>;
/// Per-pixel wound probability from a segmenter.
using ProbabilityMap = Raster<float, 1>;

/// Axis-aligned, real-valued, half-open [x_min,x_max) x [y_min,y_max).
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  [[nodiscard]] double width() const noexcept { return x_max - x_min; }
  [[nodiscard]] double height() const noexcept { return y_max - y_min; }
  [[nodiscard]] double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
  [[nodiscard]] bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  [[nodiscard]] double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  [[nodiscard]] double center_y() const noexcept { return 0.5 * (y_min + y_max); }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  Box box;
  double confidence = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Integer pixel rectangle, half-open.
struct PixelBox {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  [[nodiscard]] int width() const noexcept { return x_max - x_min; }
  [[nodiscard]] int height() const noexcept { return y_max - y_min; }
  [[nodiscard]] bool empty() const noexcept { return width() <= 0 || height() <= 0; }
  [[nodiscard]] Box to_box() const noexcept { return {double(x_min), double(y_min), double(x_max), double(y_max)}; }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Everything needed to map a square model-input pixel back to the source
/// image: the crop rectangle, the zero padding that made it square, and the
/// resize ratio output_size / padded_side.
struct CropGeometry {
  PixelBox source_box;
  int pad_top = 0;
  int pad_left = 0;
  int scale_num = 1;  // output_size
  int scale_den = 1;  // padded (square) side
  int output_size = 1;

  [[nodiscard]] int padded_side() const noexcept { return scale_den; }
  friend bool operator==(const CropGeometry&, const CropGeometry&) = default;
};

template <typename T, int C>
Raster<T, C> crop(const Raster<T, C>& src, const PixelBox& box) {
  if (box.empty() || box.x_min < 0 || box.y_min < 0 || box.x_max > src.width || box.y_max > src.height) {
    throw invalid_geometry("crop box (" + std::to_string(box.x_min) + "," + std::to_string(box.y_min) + "," +
                           std::to_string(box.x_max) + "," + std::to_string(box.y_max) + ") outside " +
                           std::to_string(src.height) + "x" + std::to_string(src.width) + " raster");
  }
  Raster<T, C> out(box.height(), box.width());
  for (int r = 0; r < out.height; ++r) {
    const auto* row = src.data.data() + src.index(r + box.y_min, box.x_min);
    std::copy(row, row + static_cast<std::size_t>(out.width) * C, out.data.data() + out.index(r, 0));
  }
  return out;
}

struct PadOffsets {
  int top = 0;
  int left = 0;
};

/// Zero-pads to a square of side max(H,W); the odd leftover pixel goes to the
/// bottom/right.
template <typename T, int C>
std::pair<Raster<T, C>, PadOffsets> pad_to_square(const Raster<T, C>& src) {
  const int side = std::max(src.height, src.width);
  PadOffsets off{(side - src.height) / 2, (side - src.width) / 2};
  if (side == src.height && side == src.width) return {src, off};
  Raster<T, C> out(side, side, T{});
  for (int r = 0; r < src.height; ++r) {
    const auto* row = src.data.data() + src.index(r, 0);
    std::copy(row, row + static_cast<std::size_t>(src.width) * C, out.data.data() + out.index(r + off.top, off.left));
  }
  return {std::move(out), off};
}

/// Nearest-neighbour resize with the fixed mapping
/// out(i,j) = in(floor(i*H/out_h), floor(j*W/out_w)).
template <typename T, int C>
Raster<T, C> resize_nearest(const Raster<T, C>& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw invalid_input("resize target must be at least 1x1");
  if (src.empty()) throw invalid_input("cannot resize an empty raster");
  if (out_h == src.height && out_w == src.width) return src;
  Raster<T, C> out(out_h, out_w);
  std::vector<int> col_src(static_cast<std::size_t>(out_w));
  for (int j = 0; j < out_w; ++j)
    col_src[j] = static_cast<int>(static_cast<std::int64_t>(j) * src.width / out_w);
  for (int i = 0; i < out_h; ++i) {
    const int si = static_cast<int>(static_cast<std::int64_t>(i) * src.height / out_h);
    for (int j = 0; j < out_w; ++j) {
      const auto* s = src.data.data() + src.index(si, col_src[j]);
      std::copy(s, s + C, out.data.data() + out.index(i, j));
    }
  }
  return out;
}

template <typename T, int C>
Raster<T, C> flip_horizontal(const Raster<T, C>& src) {
  Raster<T, C> out(src.height, src.width);
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < src.width; ++c)
      for (int ch = 0; ch < C; ++ch) out.at(r, src.width - 1 - c, ch) = src.at(r, c, ch);
  return out;
}

template <typename T, int C>
Raster<T, C> flip_vertical(const Raster<T, C>& src) {
  Raster<T, C> out(src.height, src.width);
  for (int r = 0; r < src.height; ++r) {
    const auto* row = src.data.data() + src.index(r, 0);
    std::copy(row, row + static_cast<std::size_t>(src.width) * C, out.data.data() + out.index(src.height - 1 - r, 0));
  }
  return out;
}

inline std::size_t foreground_count(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto v) { return v != 0; }));
}

/// Fraction of foreground pixels.
inline double coverage(const Mask& mask) {
  if (mask.empty()) throw invalid_input("coverage of a zero-size mask");
  return static_cast<double>(foreground_count(mask)) / static_cast<double>(mask.pixel_count());
}

/// Real-valued box to pixel rectangle: min corners round down, max corners
/// round up, then clamp to the image.
inline PixelBox rasterize(const Box& box, int img_h, int img_w) {
  PixelBox p{static_cast<int>(std::floor(box.x_min)), static_cast<int>(std::floor(box.y_min)),
             static_cast<int>(std::ceil(box.x_max)), static_cast<int>(std::ceil(box.y_max))};
  p.x_min = std::clamp(p.x_min, 0, img_w);
  p.x_max = std::clamp(p.x_max, 0, img_w);
  p.y_min = std::clamp(p.y_min, 0, img_h);
  p.y_max = std::clamp(p.y_max, 0, img_h);
  return p;
}

/// Crop -> pad_to_square -> resize_nearest, returning the geometry that
/// inverts it.
template <typename T, int C>
std::pair<Raster<T, C>, CropGeometry> crop_pad_resize(const Raster<T, C>& src, const PixelBox& box, int output_size) {
  if (output_size < 1) throw invalid_input("output_size must be positive");
  auto cropped = crop(src, box);
  auto [padded, off] = pad_to_square(cropped);
  CropGeometry geom{box, off.top, off.left, output_size, padded.height, output_size};
  return {resize_nearest(padded, output_size, output_size), geom};
}

/// Applies the forward mapping of `geom` to a raster of the source size.
template <typename T, int C>
Raster<T, C> apply_geometry(const Raster<T, C>& src, const CropGeometry& geom) {
  return crop_pad_resize(src, geom.source_box, geom.output_size).first;
}

/// Maps a prediction in model-input coordinates back onto an all-zero mask of
/// the full image. Each padded-square pixel i takes the output pixel
/// ceil(i*out/S) (clamped), which is the exact inverse of the forward floor
/// mapping whenever out >= S.
inline Mask project_mask(const Mask& pred, const CropGeometry& geom, int full_h, int full_w) {
  const auto& b = geom.source_box;
  const int side = geom.padded_side();
  const int out = geom.output_size;
  if (pred.height != out || pred.width != out)
    throw invalid_geometry("prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                           ", geometry expects " + std::to_string(out) + "x" + std::to_string(out));
  if (b.empty() || b.x_min < 0 || b.y_min < 0 || b.x_max > full_w || b.y_max > full_h)
    throw invalid_geometry("source box outside full image");
  if (side != std::max(b.width(), b.height()) || geom.pad_top != (side - b.height()) / 2 ||
      geom.pad_left != (side - b.width()) / 2 || geom.scale_num != out)
    throw invalid_geometry("inconsistent crop geometry");

  auto back = [&](int i) {
    const std::int64_t j = (static_cast<std::int64_t>(i) * out + side - 1) / side;
    return static_cast<int>(std::min<std::int64_t>(j, out - 1));
  };
  Mask full(full_h, full_w, 0);
  for (int r = 0; r < b.height(); ++r) {
    const int pr = back(r + geom.pad_top);
    for (int c = 0; c < b.width(); ++c) {
      full.at(r + b.y_min, c + b.x_min) = pred.at(pr, back(c + geom.pad_left));
    }
  }
  return full;
}

inline Mask threshold(const ProbabilityMap& prob, float level = 0.5f) {
  Mask m(prob.height, prob.width, 0);
  for (std::size_t i = 0; i < prob.data.size(); ++i) m.data[i] = prob.data[i] > level ? 1 : 0;
  return m;
}

inline Mask mask_union(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) throw invalid_input("mask union of different sizes");
  Mask out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = (a.data[i] | b.data[i]) ? 1 : 0;
  return out;
}

/// Checks the value-range invariants; throws invalid_input on violation.
inline void validate(const Image& img) {
  if (img.height < 1 || img.width < 1) throw invalid_input("image must be at least 1x1");
  if (img.data.size() != img.pixel_count() * 3) throw invalid_input("image buffer size mismatch");
  for (float v : img.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw invalid_input("image intensity outside [0,1]");
}

inline void validate(const Mask& m) {
  if (m.height < 1 || m.width < 1) throw invalid_input("mask must be at least 1x1");
  if (m.data.size() != m.pixel_count()) throw invalid_input("mask buffer size mismatch");
  for (auto v : m.data)
    if (v > 1) throw invalid_input("mask value outside {0,1}");
}

}  // namespace dseg
