#pragma once

#include <utility>
#include <vector>

#include <json.hpp>

#include "dseg/core/random.hpp"
#include "dseg/nn/train.hpp"

namespace dseg::harness {

template <typename T>
T pick(const std::vector<T>& choices, Rng& rng) {
  return choices[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(choices.size()) - 1))];
}

/// Open interval sample; redraws the (measure-zero) endpoints.
inline double open_uniform(Rng& rng, std::pair<double, double> r) {
  double v;
  do v = uniform(rng, r.first, r.second);
  while (v <= r.first || v >= r.second);
  return v;
}

struct DetectionSpace {
  std::vector<int> batch_size{8, 16, 32, 64};
  std::pair<double, double> l2{1e-6, 1e-3};
  std::vector<double> momentum{0.99, 0.97, 0.95, 0.90};
  std::pair<double, double> initial_lr{3e-6, 3e-3};
  std::vector<double> lr_decay{0.97, 0.95, 0.93, 0.85};
};

struct SegmentationSpace {
  std::vector<int> batch_size{4, 8, 16, 32};
  std::vector<double> weight_decay{1e-4, 1e-5, 0.0};
  std::pair<double, double> initial_lr{3e-5, 3e-2};
  std::vector<double> lr_decay{0.99, 0.97, 0.95, 0.93, 0.89};
};

struct HyperSpace {
  DetectionSpace detection;
  SegmentationSpace segmentation;
};

/// Fills the searched fields of `base`; continuous ranges are uniform on the
/// linear scale, discrete lists uniform over their entries. Draw order is
/// fixed so a given RNG state always yields the same config.
inline nn::TrainConfig sample_segmentation(const SegmentationSpace& s, nn::TrainConfig base, Rng& rng) {
  base.batch_size = pick(s.batch_size, rng);
  base.weight_decay = pick(s.weight_decay, rng);
  base.initial_lr = open_uniform(rng, s.initial_lr);
  base.lr_decay = pick(s.lr_decay, rng);
  return base;
}

/// "momentum" is Adam's first-moment decay; l2 is the (decoupled) weight decay.
inline nn::TrainConfig sample_detection(const DetectionSpace& s, nn::TrainConfig base, Rng& rng) {
  base.batch_size = pick(s.batch_size, rng);
  base.weight_decay = open_uniform(rng, s.l2);
  base.adam_beta1 = pick(s.momentum, rng);
  base.initial_lr = open_uniform(rng, s.initial_lr);
  base.lr_decay = pick(s.lr_decay, rng);
  return base;
}

inline nlohmann::json to_json(const nn::TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"initial_lr", c.initial_lr},
          {"lr_decay", c.lr_decay},
          {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"early_stopping", c.early_stopping},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"focal_alpha", c.focal_alpha},
          {"focal_gamma", c.focal_gamma},
          {"box_loss_weight", c.box_loss_weight},
          {"seed", c.seed}};
}

/// Overlays any keys present in `j` onto `base`.
inline nn::TrainConfig train_config_from_json(const nlohmann::json& j, nn::TrainConfig base = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("batch_size", base.batch_size);
  get("initial_lr", base.initial_lr);
  get("lr_decay", base.lr_decay);
  get("weight_decay", base.weight_decay);
  get("max_epochs", base.max_epochs);
  get("early_stop_patience", base.early_stop_patience);
  get("early_stopping", base.early_stopping);
  get("adam_beta1", base.adam_beta1);
  get("adam_beta2", base.adam_beta2);
  get("adam_eps", base.adam_eps);
  get("focal_alpha", base.focal_alpha);
  get("focal_gamma", base.focal_gamma);
  get("box_loss_weight", base.box_loss_weight);
  get("seed", base.seed);
  base.validate();
  return base;
}

}  // namespace dseg::harness
