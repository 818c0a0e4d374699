#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "dseg/core/error.hpp"
#include "dseg/core/random.hpp"
#include "dseg/core/raster.hpp"

namespace dseg::data {

struct AugmentParams {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double brightness_delta_max = 0.1;
  double scale_min = 0.1;
  double scale_max = 2.0;

  void validate() const {
    if (p_hflip < 0 || p_hflip > 1 || p_vflip < 0 || p_vflip > 1) throw invalid_input("flip probabilities must be in [0,1]");
    if (brightness_delta_max < 0) throw invalid_input("brightness_delta_max must be non-negative");
    if (!(scale_min > 0 && scale_min <= scale_max)) throw invalid_input("need 0 < scale_min <= scale_max");
  }

  static AugmentParams none() { return {0.0, 0.0, 0.0, 1.0, 1.0}; }
};

/// The random draws for one augmentation, always taken in the same order so
/// the RNG stream does not depend on which transforms end up active.
struct AugmentDraw {
  bool hflip = false;
  bool vflip = false;
  double delta = 0.0;
  double scale = 1.0;
};

inline AugmentDraw draw_augment(const AugmentParams& p, Rng& rng) {
  AugmentDraw d;
  d.hflip = bernoulli(rng, p.p_hflip);
  d.vflip = bernoulli(rng, p.p_vflip);
  d.delta = uniform(rng, -p.brightness_delta_max, p.brightness_delta_max);
  d.scale = uniform(rng, p.scale_min, p.scale_max);
  return d;
}

/// Centre-crops (when larger) or zero-pads (when smaller) each axis to h x w.
template <typename T, int C>
Raster<T, C> fit_center(const Raster<T, C>& src, int h, int w) {
  Raster<T, C> out(h, w, T{});
  const int dy = (src.height - h) / 2;  // >0: crop offset, <0: pad offset
  const int dx = (src.width - w) / 2;
  for (int r = 0; r < h; ++r) {
    const int sr = r + dy;
    if (sr < 0 || sr >= src.height) continue;
    for (int c = 0; c < w; ++c) {
      const int sc = c + dx;
      if (sc < 0 || sc >= src.width) continue;
      for (int ch = 0; ch < C; ++ch) out.at(r, c, ch) = src.at(sr, sc, ch);
    }
  }
  return out;
}

template <typename T, int C>
Raster<T, C> scale_and_fit(const Raster<T, C>& src, double s) {
  const int nh = std::max(1, static_cast<int>(std::lround(s * src.height)));
  const int nw = std::max(1, static_cast<int>(std::lround(s * src.width)));
  if (nh == src.height && nw == src.width) return src;
  return fit_center(resize_nearest(src, nh, nw), src.height, src.width);
}

inline Image adjust_brightness(const Image& img, double delta) {
  Image out = img;
  const float d = static_cast<float>(delta);
  for (auto& v : out.data) v = std::clamp(v + d, 0.0f, 1.0f);
  return out;
}

/// Applies a fixed draw: horizontal flip, vertical flip, brightness (image
/// only), then nearest-neighbour scaling cropped or padded back to size.
inline std::pair<Image, Mask> apply_augment(const Image& image, const Mask& mask, const AugmentDraw& d) {
  if (image.height != mask.height || image.width != mask.width)
    throw invalid_input("augment: image and mask dimensions differ");
  Image img = image;
  Mask m = mask;
  if (d.hflip) {
    img = flip_horizontal(img);
    m = flip_horizontal(m);
  }
  if (d.vflip) {
    img = flip_vertical(img);
    m = flip_vertical(m);
  }
  if (d.delta != 0.0) img = adjust_brightness(img, d.delta);
  if (d.scale != 1.0) {
    img = scale_and_fit(img, d.scale);
    m = scale_and_fit(m, d.scale);
  }
  return {std::move(img), std::move(m)};
}

inline std::pair<Image, Mask> augment(const Image& image, const Mask& mask, const AugmentParams& params, Rng& rng) {
  return apply_augment(image, mask, draw_augment(params, rng));
}

}  // namespace dseg::data
