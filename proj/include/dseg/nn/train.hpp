#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dseg/core/random.hpp"
#include "dseg/data/augment.hpp"
#include "dseg/nn/adam.hpp"
#include "dseg/nn/losses.hpp"
#include "dseg/nn/models.hpp"

namespace dseg::nn {

struct TrainConfig {
  int batch_size = 8;
  double initial_lr = 1e-3;
  double lr_decay = 0.95;  // per epoch
  double weight_decay = 0.0;
  int max_epochs = 100;
  int early_stop_patience = 12;
  bool early_stopping = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double box_loss_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw invalid_input("batch_size must be >= 1");
    if (!(initial_lr > 0)) throw invalid_input("initial_lr must be > 0");
    if (!(lr_decay > 0 && lr_decay <= 1)) throw invalid_input("lr_decay must be in (0,1]");
    if (weight_decay < 0) throw invalid_input("weight_decay must be >= 0");
    if (max_epochs < 1) throw invalid_input("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw invalid_input("early_stop_patience must be >= 1");
  }
};

/// Exponential per-epoch schedule; epoch is 0-based.
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) { return cfg.initial_lr * std::pow(cfg.lr_decay, epoch); }

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  double class_weight = 1.0;
};

/// Replaces (or inspects) the computed validation loss of a 1-based epoch.
using ValidationHook = std::function<double(int epoch, double computed)>;

/// Shared epoch loop: seeded shuffle, mini-batch Adam with the exponential
/// schedule, validation after every epoch, patience-based stopping, and
/// restoration of the best-validation weights.
template <typename T, typename BatchLoss, typename ValLoss>
TrainHistory fit(ParameterList<T>& params, std::size_t n_samples, const TrainConfig& cfg, BatchLoss&& batch_loss,
                 ValLoss&& val_loss, const ValidationHook& hook = {}) {
  cfg.validate();
  if (n_samples == 0) throw invalid_input("training set is empty");
  Rng rng(derive_seed(cfg.seed, {0x5eed}));
  AdamState<T> adam;
  TrainHistory hist;
  std::vector<std::vector<T>> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& p : params) best.push_back(p.var->value.data);
  };
  snapshot();

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  int since_best = 0;
  for (int e = 0; e < cfg.max_epochs; ++e) {
    const double lr = lr_at_epoch(cfg, e);
    AdamHyper hyper{lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay};
    shuffle(order, rng);
    double loss_sum = 0;
    for (std::size_t b0 = 0; b0 < n_samples; b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t nb = std::min<std::size_t>(cfg.batch_size, n_samples - b0);
      for (auto& p : params) p.var->value.zero_grad();
      auto loss = batch_loss(std::span<const std::size_t>(order.data() + b0, nb), rng);
      const double lv = static_cast<double>(loss->value.data[0]);
      if (!std::isfinite(lv)) throw training_error("non-finite training loss", e + 1);
      backward(loss);
      try {
        adam_step(params, adam, hyper);
      } catch (const numeric_error& err) {
        throw training_error(err.what(), e + 1);
      }
      loss_sum += lv * static_cast<double>(nb);
    }
    double vl = val_loss();
    if (hook) vl = hook(e + 1, vl);
    if (!std::isfinite(vl)) throw training_error("non-finite validation loss", e + 1);
    hist.epochs.push_back({e + 1, lr, loss_sum / static_cast<double>(n_samples), vl});
    if (vl < hist.best_val_loss) {
      hist.best_val_loss = vl;
      hist.best_epoch = e + 1;
      since_best = 0;
      snapshot();
    } else if (++since_best >= cfg.early_stop_patience && cfg.early_stopping) {
      hist.stopped_early = true;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k].var->value.data = best[k];
  return hist;
}

/// A segmenter input/target pair already at the model's input size.
struct SegSample {
  Image image;
  Mask mask;
};

template <typename T>
struct SegmenterTrainResult {
  BasicSegmenter<T> model;
  TrainHistory history;
};

template <typename T>
double segmentation_loss(const BasicSegmenter<T>& model, std::span<const SegSample> samples, double class_w,
                         int batch_size = 32) {
  double total = 0;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t nb = std::min<std::size_t>(batch_size, samples.size() - b0);
    std::vector<const Image*> imgs;
    std::vector<const Mask*> masks;
    for (std::size_t i = 0; i < nb; ++i) {
      imgs.push_back(&samples[b0 + i].image);
      masks.push_back(&samples[b0 + i].mask);
    }
    auto logits = model.forward(leaf(to_tensor<T>(std::span<const Image* const>(imgs))));
    auto loss = weighted_bce_loss(logits, to_tensor<T>(std::span<const Mask* const>(masks)), static_cast<T>(class_w));
    total += static_cast<double>(loss->value.data[0]) * static_cast<double>(nb);
  }
  return total / static_cast<double>(samples.size());
}

/// Trains with weighted BCE; the class weight is the background/wound pixel
/// ratio of the training samples. Returns the best-validation-epoch weights.
template <typename T = float>
SegmenterTrainResult<T> train_segmenter(std::span<const SegSample> train, std::span<const SegSample> val,
                                        const SegmenterConfig& model_cfg, const TrainConfig& cfg,
                                        const data::AugmentParams& aug, const ValidationHook& hook = {}) {
  if (train.empty() || val.empty()) throw invalid_input("train_segmenter needs non-empty train and validation sets");
  aug.validate();
  for (const auto& s : train)
    if (s.image.height != model_cfg.input_size || s.image.width != model_cfg.input_size)
      throw invalid_input("training sample size does not match segmenter input_size");
  std::vector<Mask> masks;
  masks.reserve(train.size());
  for (const auto& s : train) masks.push_back(s.mask);
  const double w = class_weight(masks);

  SegmenterTrainResult<T> result{BasicSegmenter<T>(model_cfg, derive_seed(cfg.seed, {0x1a17})), {}};
  auto& model = result.model;
  auto batch_loss = [&](std::span<const std::size_t> idx, Rng& rng) {
    std::vector<Image> imgs;
    std::vector<Mask> ms;
    imgs.reserve(idx.size());
    ms.reserve(idx.size());
    for (auto i : idx) {
      auto [im, m] = data::augment(train[i].image, train[i].mask, aug, rng);
      imgs.push_back(std::move(im));
      ms.push_back(std::move(m));
    }
    std::vector<const Image*> ip;
    std::vector<const Mask*> mp;
    for (std::size_t k = 0; k < imgs.size(); ++k) {
      ip.push_back(&imgs[k]);
      mp.push_back(&ms[k]);
    }
    auto logits = model.forward(leaf(to_tensor<T>(std::span<const Image* const>(ip))));
    return weighted_bce_loss(logits, to_tensor<T>(std::span<const Mask* const>(mp)), static_cast<T>(w));
  };
  auto val_loss = [&] { return segmentation_loss(model, val, w); };
  result.history = fit(model.parameters(), train.size(), cfg, batch_loss, val_loss, hook);
  result.history.class_weight = w;
  return result;
}

}  // namespace dseg::nn
