#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "dseg/core/random.hpp"
#include "dseg/core/raster.hpp"
#include "dseg/nn/losses.hpp"
#include "dseg/nn/models.hpp"
#include "dseg/nn/train.hpp"

namespace dseg::nn {

struct DetSample {
  Image image;
  std::vector<Box> boxes;
};

/// Per-cell training targets on an h x w grid: objectness [1,h,w] and
/// log-distance offsets [4,h,w] (left, top, right, bottom).
struct DetTargets {
  int grid_h = 0, grid_w = 0;
  std::vector<float> objectness;
  std::vector<float> offsets;
};

inline double cell_center(int index, int stride) { return (index + 0.5) * stride; }

/// A cell is positive iff its centre lies strictly inside a box; when boxes
/// overlap, the smallest-area box claims the cell.
inline DetTargets encode_targets(std::span<const Box> boxes, int grid_h, int grid_w, int stride) {
  DetTargets t{grid_h, grid_w, std::vector<float>(static_cast<std::size_t>(grid_h) * grid_w, 0.0f),
               std::vector<float>(static_cast<std::size_t>(4) * grid_h * grid_w, 0.0f)};
  const std::size_t hw = static_cast<std::size_t>(grid_h) * grid_w;
  for (int i = 0; i < grid_h; ++i)
    for (int j = 0; j < grid_w; ++j) {
      const double cx = cell_center(j, stride), cy = cell_center(i, stride);
      const Box* owner = nullptr;
      for (const auto& b : boxes) {
        if (!(cx > b.x_min && cx < b.x_max && cy > b.y_min && cy < b.y_max)) continue;
        if (!owner || b.area() < owner->area()) owner = &b;
      }
      if (!owner) continue;
      const std::size_t cell = static_cast<std::size_t>(i) * grid_w + j;
      t.objectness[cell] = 1.0f;
      const double d[4] = {cx - owner->x_min, cy - owner->y_min, owner->x_max - cx, owner->y_max - cy};
      for (int k = 0; k < 4; ++k) t.offsets[k * hw + cell] = static_cast<float>(std::log(d[k] / stride));
    }
  return t;
}

/// Turns one image's raw head output ([5,h,w] laid out contiguously) into a
/// detection per cell, boxes clamped to img_h x img_w.
template <typename T>
std::vector<Detection> detector_decode(std::span<const T> raw, int grid_h, int grid_w, int stride, int img_h,
                                       int img_w) {
  const std::size_t hw = static_cast<std::size_t>(grid_h) * grid_w;
  if (raw.size() != 5 * hw) throw shape_error("detector_decode: raw output size does not match 5 x grid");
  std::vector<Detection> out;
  out.reserve(hw);
  for (int i = 0; i < grid_h; ++i)
    for (int j = 0; j < grid_w; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * grid_w + j;
      double d[4];
      for (int k = 0; k < 4; ++k) d[k] = std::exp(std::clamp(static_cast<double>(raw[(1 + k) * hw + cell]), -10.0, 10.0)) * stride;
      const double cx = cell_center(j, stride), cy = cell_center(i, stride);
      Box b{std::clamp(cx - d[0], 0.0, double(img_w)), std::clamp(cy - d[1], 0.0, double(img_h)),
            std::clamp(cx + d[2], 0.0, double(img_w)), std::clamp(cy + d[3], 0.0, double(img_h))};
      out.push_back({b, static_cast<double>(sigmoid_scalar(raw[cell]))});
    }
  return out;
}

/// Zero-pads bottom/right so both sides are multiples of `stride`.
inline Image pad_to_stride(const Image& img, int stride) {
  const int h = (img.height + stride - 1) / stride * stride;
  const int w = (img.width + stride - 1) / stride * stride;
  if (h == img.height && w == img.width) return img;
  Image out(h, w, 0.0f);
  for (int r = 0; r < img.height; ++r)
    std::copy(img.data.begin() + img.index(r, 0), img.data.begin() + img.index(r, 0) + std::size_t(img.width) * 3,
              out.data.begin() + out.index(r, 0));
  return out;
}

/// All per-cell detections (unfiltered) for one image.
template <typename T>
std::vector<Detection> detect(const BasicDetector<T>& model, const Image& image) {
  const int s = model.config().stride;
  const Image padded = pad_to_stride(image, s);
  const Image* one[] = {&padded};
  auto raw = model.forward(leaf(to_tensor<T>(std::span<const Image* const>(one, 1))));
  return detector_decode<T>(raw->value.data, padded.height / s, padded.width / s, s, image.height, image.width);
}

namespace detail {

inline Box flip_box_h(const Box& b, int w) { return {w - b.x_max, b.y_min, w - b.x_min, b.y_max}; }
inline Box flip_box_v(const Box& b, int h) { return {b.x_min, h - b.y_max, b.x_max, h - b.y_min}; }

template <typename T>
Var<T> detection_loss(const BasicDetector<T>& model, std::span<const DetSample* const> batch, const TrainConfig& cfg) {
  const int s = model.config().stride;
  const int h = batch[0]->image.height, w = batch[0]->image.width;
  for (const auto* smp : batch)
    if (smp->image.height != h || smp->image.width != w)
      throw invalid_input("detector batch images must share one size");
  if (h % s != 0 || w % s != 0) throw invalid_input("detector training images must be multiples of the stride");
  const int gh = h / s, gw = w / s;
  const std::size_t hw = static_cast<std::size_t>(gh) * gw;
  const int n = static_cast<int>(batch.size());
  Tensor<T> obj({n, 1, gh, gw}), off({n, 4, gh, gw});
  std::vector<const Image*> imgs;
  for (int b = 0; b < n; ++b) {
    imgs.push_back(&batch[b]->image);
    const auto t = encode_targets(batch[b]->boxes, gh, gw, s);
    std::copy(t.objectness.begin(), t.objectness.end(), obj.data.begin() + b * hw);
    std::copy(t.offsets.begin(), t.offsets.end(), off.data.begin() + b * 4 * hw);
  }
  auto raw = model.forward(leaf(to_tensor<T>(std::span<const Image* const>(imgs))));
  auto focal = focal_loss(slice_channels(raw, 0, 1), obj, static_cast<T>(cfg.focal_alpha), static_cast<T>(cfg.focal_gamma));
  auto l1 = box_l1_loss(slice_channels(raw, 1, 5), off, obj, static_cast<T>(cfg.box_loss_weight));
  return add(focal, l1);
}

}  // namespace detail

template <typename T>
double detection_loss_value(const BasicDetector<T>& model, std::span<const DetSample> samples, const TrainConfig& cfg,
                            int batch_size = 32) {
  double total = 0;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t nb = std::min<std::size_t>(batch_size, samples.size() - b0);
    std::vector<const DetSample*> ptrs;
    for (std::size_t i = 0; i < nb; ++i) ptrs.push_back(&samples[b0 + i]);
    auto loss = detail::detection_loss(model, std::span<const DetSample* const>(ptrs), cfg);
    total += static_cast<double>(loss->value.data[0]) * static_cast<double>(nb);
  }
  return total / static_cast<double>(samples.size());
}

template <typename T>
struct DetectorTrainResult {
  BasicDetector<T> model;
  TrainHistory history;
};

/// Focal objectness loss plus weighted L1 offset loss, trained with the shared
/// epoch loop. Augmentation: flips (boxes flipped with the image) and the
/// brightness shift; no rescaling, so box targets stay exact.
template <typename T = float>
DetectorTrainResult<T> train_detector(std::span<const DetSample> train, std::span<const DetSample> val,
                                      const DetectorConfig& model_cfg, const TrainConfig& cfg,
                                      const data::AugmentParams& aug, const ValidationHook& hook = {}) {
  if (train.empty() || val.empty()) throw invalid_input("train_detector needs non-empty train and validation sets");
  aug.validate();
  DetectorTrainResult<T> result{BasicDetector<T>(model_cfg, derive_seed(cfg.seed, {0xde7})), {}};
  auto& model = result.model;
  auto batch_loss = [&](std::span<const std::size_t> idx, Rng& rng) {
    std::vector<DetSample> batch;
    batch.reserve(idx.size());
    for (auto i : idx) {
      const auto& src = train[i];
      const auto d = data::draw_augment(aug, rng);
      DetSample s{src.image, src.boxes};
      if (d.hflip) {
        s.image = flip_horizontal(s.image);
        for (auto& b : s.boxes) b = detail::flip_box_h(b, s.image.width);
      }
      if (d.vflip) {
        s.image = flip_vertical(s.image);
        for (auto& b : s.boxes) b = detail::flip_box_v(b, s.image.height);
      }
      if (d.delta != 0.0) s.image = data::adjust_brightness(s.image, d.delta);
      batch.push_back(std::move(s));
    }
    std::vector<const DetSample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    return detail::detection_loss(model, std::span<const DetSample* const>(ptrs), cfg);
  };
  auto val_loss = [&] { return detection_loss_value(model, val, cfg); };
  result.history = fit(model.parameters(), train.size(), cfg, batch_loss, val_loss, hook);
  return result;
}

}  // namespace dseg::nn
