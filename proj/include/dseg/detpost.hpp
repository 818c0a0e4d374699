#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/core/raster.hpp"
#include "dseg/metrics.hpp"
#include "dseg/nn/detector.hpp"
#include "dseg/nn/models.hpp"

namespace dseg::detpost {

struct PostprocessParams {
  double confidence_threshold = 0.3;
  double area_factor = 1.5;
  double nms_iou = 0.5;
  int output_size = 64;

  void validate() const {
    if (!(confidence_threshold >= 0 && confidence_threshold < 1)) throw invalid_input("confidence_threshold must be in [0,1)");
    if (!(area_factor >= 1)) throw invalid_input("area_factor must be >= 1");
    if (!(nms_iou >= 0 && nms_iou <= 1)) throw invalid_input("nms_iou must be in [0,1]");
    if (output_size < 8) throw invalid_input("output_size must be >= 8");
  }
};

/// Keeps detections with confidence strictly above `threshold`, in order.
inline std::vector<Detection> filter_detections(std::span<const Detection> dets, double threshold) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [threshold](const Detection& d) { return d.confidence > threshold; });
  return out;
}

/// Greedy suppression in descending confidence (stable for ties).
inline std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  std::vector<Detection> kept;
  for (auto i : order) {
    const bool clash = std::any_of(kept.begin(), kept.end(),
                                   [&](const Detection& k) { return metrics::box_iou(k.box, dets[i].box) > iou_threshold; });
    if (!clash) kept.push_back(dets[i]);
  }
  return kept;
}

/// Scales both sides by sqrt(area_factor) about the centre, then clamps to
/// the image.
inline Box enlarge_box(const Box& box, double area_factor, int img_h, int img_w) {
  if (!box.valid()) throw invalid_geometry("enlarge_box: invalid box");
  if (!(area_factor >= 1)) throw invalid_input("enlarge_box: area_factor must be >= 1");
  const double f = std::sqrt(area_factor);
  const double hw = 0.5 * box.width() * f, hh = 0.5 * box.height() * f;
  const double cx = box.center_x(), cy = box.center_y();
  return {std::clamp(cx - hw, 0.0, double(img_w)), std::clamp(cy - hh, 0.0, double(img_h)),
          std::clamp(cx + hw, 0.0, double(img_w)), std::clamp(cy + hh, 0.0, double(img_h))};
}

/// enlarge -> rasterize -> crop -> pad_to_square -> resize to output_size.
inline std::pair<Image, CropGeometry> build_crop(const Image& image, const Box& box, const PostprocessParams& params) {
  const PixelBox px = rasterize(enlarge_box(box, params.area_factor, image.height, image.width), image.height, image.width);
  if (px.empty()) throw invalid_geometry("build_crop: box does not intersect the image");
  return crop_pad_resize(image, px, params.output_size);
}

/// Whole-image crop used by the fallback path and the no-detection condition.
inline std::pair<Image, CropGeometry> full_image_crop(const Image& image, int output_size) {
  return crop_pad_resize(image, PixelBox{0, 0, image.width, image.height}, output_size);
}

struct Diagnostics {
  int raw_detections = 0;
  int box_count = 0;
  bool fallback = false;
  std::vector<Detection> boxes;
};

/// Segments the given crops and unions their projections onto a full-size
/// mask. `segment` maps a batch of output_size crops to probability maps.
template <typename Segment>
Mask segment_crops(const Image& image, std::span<const std::pair<Image, CropGeometry>> crops, Segment&& segment) {
  std::vector<const Image*> inputs;
  for (const auto& c : crops) inputs.push_back(&c.first);
  const std::vector<ProbabilityMap> probs = segment(std::span<const Image* const>(inputs));
  if (probs.size() != crops.size()) throw shape_error("segmenter returned a different number of maps than crops");
  Mask out(image.height, image.width, 0);
  for (std::size_t k = 0; k < crops.size(); ++k)
    out = mask_union(out, project_mask(threshold(probs[k], 0.5f), crops[k].second, image.height, image.width));
  return out;
}

/// Detect-and-segment on one image. `detect` returns raw detections for the
/// image; `segment` is as in segment_crops. With no detection above the
/// threshold the whole image is segmented and the fallback flag is set.
template <typename Detect, typename Segment>
  requires std::invocable<Detect&, const Image&>
std::pair<Mask, Diagnostics> ds_infer(const Image& image, Detect&& detect, Segment&& segment,
                                      const PostprocessParams& params) {
  params.validate();
  Diagnostics diag;
  const std::vector<Detection> raw = detect(image);
  diag.raw_detections = static_cast<int>(raw.size());
  diag.boxes = nms(filter_detections(raw, params.confidence_threshold), params.nms_iou);
  std::vector<std::pair<Image, CropGeometry>> crops;
  for (const auto& d : diag.boxes) {
    if (!d.box.valid()) continue;
    const PixelBox px = rasterize(enlarge_box(d.box, params.area_factor, image.height, image.width), image.height, image.width);
    if (px.empty()) continue;
    crops.push_back(crop_pad_resize(image, px, params.output_size));
  }
  diag.box_count = static_cast<int>(crops.size());
  if (crops.empty()) {
    diag.fallback = true;
    crops.push_back(full_image_crop(image, params.output_size));
  }
  Mask m = segment_crops(image, std::span<const std::pair<Image, CropGeometry>>(crops), segment);
  return {std::move(m), std::move(diag)};
}

template <typename T>
std::pair<Mask, Diagnostics> ds_infer(const Image& image, const nn::BasicDetector<T>& detector,
                                      const nn::BasicSegmenter<T>& segmenter, const PostprocessParams& params) {
  if (segmenter.config().input_size != params.output_size)
    throw invalid_input("segmenter input_size does not match output_size");
  return ds_infer(
      image, [&](const Image& img) { return nn::detect(detector, img); },
      [&](std::span<const Image* const> batch) { return segmenter.predict(batch); }, params);
}

}  // namespace dseg::detpost
