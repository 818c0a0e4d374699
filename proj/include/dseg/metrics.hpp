#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/core/raster.hpp"

namespace dseg::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct PixelMetrics {
  double mcc = 0;
  double dice = 0;
  double iou = 0;
};

inline ConfusionCounts confusion(const Mask& pred, const Mask& truth) {
  if (pred.height != truth.height || pred.width != truth.width)
    throw invalid_input("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                        " vs truth " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool t = truth.data[i] != 0;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
    c.tn += !p && !t;
  }
  return c;
}

/// MCC is 0 whenever a marginal is empty; Dice and IoU are 1 when neither
/// mask has foreground.
inline PixelMetrics pixel_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw invalid_input("pixel_metrics on zero pixels");
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
  PixelMetrics m;
  const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
  if (f1 == 0 || f2 == 0 || f3 == 0 || f4 == 0) {
    m.mcc = 0.0;
  } else {
    // each factor separately square-rooted: the product overflows 2^53 for
    // megapixel masks
    m.mcc = (tp * tn - fp * fn) / (std::sqrt(f1) * std::sqrt(f2) * std::sqrt(f3) * std::sqrt(f4));
    m.mcc = std::clamp(m.mcc, -1.0, 1.0);
  }
  const double err = fp + fn;
  if (tp + err == 0) {
    m.dice = 1.0;
    m.iou = 1.0;
  } else {
    m.dice = 2.0 * tp / (2.0 * tp + err);
    m.iou = tp / (tp + err);
  }
  return m;
}

inline PixelMetrics pixel_metrics(const Mask& pred, const Mask& truth) { return pixel_metrics(confusion(pred, truth)); }

inline double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// Single-class average precision. Detections from all images are ranked by
/// confidence (stable for ties); each one claims the unmatched ground-truth
/// box of its image with the highest IoU >= iou_threshold. The area under the
/// precision-recall curve uses the all-point monotone precision envelope.
inline double average_precision(std::span<const std::vector<Detection>> dets_per_image,
                                std::span<const std::vector<Box>> gts_per_image, double iou_threshold = 0.5) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw invalid_input("iou_threshold must be in (0,1]");
  if (dets_per_image.size() != gts_per_image.size())
    throw invalid_input("average_precision: detection and ground-truth image counts differ");

  std::size_t n_gt = 0;
  for (const auto& g : gts_per_image) n_gt += g.size();
  if (n_gt == 0) return 0.0;

  struct Ranked {
    std::size_t image;
    const Detection* det;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < dets_per_image.size(); ++i)
    for (const auto& d : dets_per_image[i]) ranked.push_back({i, &d});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.det->confidence > b.det->confidence; });

  std::vector<std::vector<char>> used(gts_per_image.size());
  for (std::size_t i = 0; i < gts_per_image.size(); ++i) used[i].assign(gts_per_image[i].size(), 0);

  std::vector<double> precision, recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& gts = gts_per_image[ranked[k].image];
    auto& flags = used[ranked[k].image];
    double best = -1;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (flags[j]) continue;
      const double iou = box_iou(ranked[k].det->box, gts[j]);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best >= iou_threshold) {
      flags[best_j] = 1;
      ++tp;
    }
    precision.push_back(double(tp) / double(k + 1));
    recall.push_back(double(tp) / double(n_gt));
  }

  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0, prev_recall = 0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace dseg::metrics
