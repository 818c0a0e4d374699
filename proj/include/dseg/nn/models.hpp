#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dseg/core/random.hpp"
#include "dseg/core/raster.hpp"
#include "dseg/nn/ops.hpp"

namespace dseg::nn {

template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>>;

enum class SegmenterVariant { unet_lite, convnet_lite };

inline std::string to_string(SegmenterVariant v) { return v == SegmenterVariant::unet_lite ? "unet_lite" : "convnet_lite"; }

inline SegmenterVariant parse_segmenter_variant(const std::string& s) {
  if (s == "unet_lite" || s == "unet") return SegmenterVariant::unet_lite;
  if (s == "convnet_lite" || s == "convnet") return SegmenterVariant::convnet_lite;
  throw invalid_input("unknown segmenter variant '" + s + "'");
}

struct SegmenterConfig {
  SegmenterVariant variant = SegmenterVariant::unet_lite;
  int depth = 3;
  int base_channels = 8;
  int input_size = 64;
};

struct DetectorConfig {
  int stride = 8;
  int base_channels = 8;
  int context_layers = 1;  // 3x3 convs at output resolution before the head
};

namespace detail {

struct ConvLayer {
  std::size_t weight = 0;  // index into the parameter list; bias follows
};

template <typename T>
ConvLayer add_conv(ParameterList<T>& params, const std::string& name, int in_ch, int out_ch, int k, Rng& rng) {
  Tensor<T> w({out_ch, in_ch, k, k});
  const double stddev = std::sqrt(2.0 / (in_ch * k * k));
  for (auto& v : w.data) v = static_cast<T>(stddev * normal01(rng));
  ConvLayer layer{params.size()};
  params.push_back({name + ".weight", leaf(std::move(w), true)});
  params.push_back({name + ".bias", leaf(Tensor<T>({out_ch}), true)});
  return layer;
}

template <typename T>
Var<T> apply(const ParameterList<T>& params, ConvLayer layer, const Var<T>& x, bool activate = true) {
  const auto& w = params[layer.weight].var;
  const int k = w->shape()[2];
  auto y = conv2d(x, w, params[layer.weight + 1].var, k / 2);
  return activate ? relu(y) : y;
}

}  // namespace detail

/// Images -> NCHW tensor, centred by subtracting 0.5.
template <typename T>
Tensor<T> to_tensor(std::span<const Image* const> images) {
  if (images.empty()) throw invalid_input("to_tensor: empty batch");
  const int h = images[0]->height, w = images[0]->width;
  Tensor<T> t({static_cast<int>(images.size()), 3, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = *images[b];
    if (img.height != h || img.width != w) throw invalid_input("to_tensor: images in a batch differ in size");
    T* dst = t.data.data() + b * 3 * hw;
    for (std::size_t p = 0; p < hw; ++p)
      for (int c = 0; c < 3; ++c) dst[c * hw + p] = static_cast<T>(img.data[p * 3 + c]) - T(0.5);
  }
  return t;
}

template <typename T>
Tensor<T> to_tensor(std::span<const Mask* const> masks) {
  const int h = masks[0]->height, w = masks[0]->width;
  Tensor<T> t({static_cast<int>(masks.size()), 1, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < masks.size(); ++b) {
    if (masks[b]->height != h || masks[b]->width != w) throw invalid_input("to_tensor: masks in a batch differ in size");
    for (std::size_t p = 0; p < hw; ++p) t.data[b * hw + p] = masks[b]->data[p] ? T(1) : T(0);
  }
  return t;
}

/// Encoder-decoder segmenter. Each level is two 3x3 conv+ReLU; the encoder
/// halves resolution `depth` times, the decoder upsamples back and (for
/// unet_lite) concatenates the matching encoder features. A 1x1 conv emits
/// one logit channel.
template <typename T>
class BasicSegmenter {
 public:
  BasicSegmenter() = default;
  BasicSegmenter(SegmenterConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.depth < 1 || cfg.base_channels < 1) throw invalid_input("segmenter depth and channels must be positive");
    if (cfg.input_size % (1 << cfg.depth) != 0)
      throw invalid_input("segmenter input_size must be divisible by 2^depth");
    Rng rng(seed);
    int in_ch = 3;
    for (int l = 0; l < cfg.depth; ++l) {
      const int ch = cfg.base_channels << l;
      enc_.push_back({detail::add_conv(params_, "enc" + std::to_string(l) + ".conv0", in_ch, ch, 3, rng),
                      detail::add_conv(params_, "enc" + std::to_string(l) + ".conv1", ch, ch, 3, rng)});
      in_ch = ch;
    }
    const int bott = cfg.base_channels << cfg.depth;
    bottleneck_ = {detail::add_conv(params_, "bottleneck.conv0", in_ch, bott, 3, rng),
                   detail::add_conv(params_, "bottleneck.conv1", bott, bott, 3, rng)};
    in_ch = bott;
    dec_.resize(cfg.depth);
    for (int l = cfg.depth - 1; l >= 0; --l) {
      const int ch = cfg.base_channels << l;
      const int cat = cfg.variant == SegmenterVariant::unet_lite ? in_ch + ch : in_ch;
      dec_[l] = {detail::add_conv(params_, "dec" + std::to_string(l) + ".conv0", cat, ch, 3, rng),
                 detail::add_conv(params_, "dec" + std::to_string(l) + ".conv1", ch, ch, 3, rng)};
      in_ch = ch;
    }
    head_ = detail::add_conv(params_, "head", in_ch, 1, 1, rng);
  }

  [[nodiscard]] const SegmenterConfig& config() const noexcept { return cfg_; }
  ParameterList<T>& parameters() noexcept { return params_; }
  const ParameterList<T>& parameters() const noexcept { return params_; }

  /// x: [N,3,H,W] with H,W divisible by 2^depth -> logits [N,1,H,W].
  Var<T> forward(const Var<T>& x) const {
    const auto& s = x->shape();
    const int div = 1 << cfg_.depth;
    if (s.size() != 4 || s[1] != 3 || s[2] % div != 0 || s[3] % div != 0)
      throw shape_error("segmenter: input " + shape_str(s) + " must be [N,3,H,W] with H,W divisible by " +
                        std::to_string(div));
    std::vector<Var<T>> skips;
    Var<T> h = x;
    for (const auto& [c0, c1] : enc_) {
      h = detail::apply(params_, c1, detail::apply(params_, c0, h));
      skips.push_back(h);
      h = maxpool2(h);
    }
    h = detail::apply(params_, bottleneck_.second, detail::apply(params_, bottleneck_.first, h));
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      h = upsample2(h);
      if (cfg_.variant == SegmenterVariant::unet_lite) h = concat_channels(h, skips[l]);
      h = detail::apply(params_, dec_[l].second, detail::apply(params_, dec_[l].first, h));
    }
    return detail::apply(params_, head_, h, false);
  }

  /// Per-pixel wound probability for a batch of equally sized images.
  std::vector<ProbabilityMap> predict(std::span<const Image* const> images) const {
    auto logits = forward(leaf(to_tensor<T>(images)));
    const int h = images[0]->height, w = images[0]->width;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::vector<ProbabilityMap> out;
    for (std::size_t b = 0; b < images.size(); ++b) {
      ProbabilityMap pm(h, w);
      for (std::size_t p = 0; p < hw; ++p) pm.data[p] = static_cast<float>(sigmoid_scalar(logits->value.data[b * hw + p]));
      out.push_back(std::move(pm));
    }
    return out;
  }

  ProbabilityMap predict(const Image& image) const {
    const Image* one[] = {&image};
    return std::move(predict(std::span<const Image* const>(one, 1)).front());
  }

 private:
  using Block = std::pair<detail::ConvLayer, detail::ConvLayer>;
  SegmenterConfig cfg_;
  ParameterList<T> params_;
  std::vector<Block> enc_;
  Block bottleneck_;
  std::vector<Block> dec_;
  detail::ConvLayer head_;
};

/// Anchor-free single-scale detector: log2(stride) conv+pool stages,
/// `context_layers` convs at the output resolution, then a 1x1 head with 5 channels
/// (objectness logit; left, top, right, bottom log-distances in stride units).
template <typename T>
class BasicDetector {
 public:
  BasicDetector() = default;
  BasicDetector(DetectorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.stride < 2 || (cfg.stride & (cfg.stride - 1)) != 0) throw invalid_input("detector stride must be a power of two");
    Rng rng(seed);
    int in_ch = 3;
    int level = 0;
    for (int s = cfg.stride; s > 1; s >>= 1, ++level) {
      const int ch = cfg.base_channels << std::min(level, 2);
      stages_.push_back(detail::add_conv(params_, "stage" + std::to_string(level), in_ch, ch, 3, rng));
      in_ch = ch;
    }
    if (cfg.context_layers < 0) throw invalid_input("detector context_layers must be >= 0");
    for (int k = 0; k < cfg.context_layers; ++k)
      context_.push_back(detail::add_conv(params_, "context" + std::to_string(k), in_ch, in_ch, 3, rng));
    head_ = detail::add_conv(params_, "head", in_ch, 5, 1, rng);
    // start from a low objectness prior so early training is not swamped by
    // easy negatives
    params_[head_.weight + 1].var->value.data[0] = static_cast<T>(-std::log((1 - 0.05) / 0.05));
  }

  [[nodiscard]] const DetectorConfig& config() const noexcept { return cfg_; }
  ParameterList<T>& parameters() noexcept { return params_; }
  const ParameterList<T>& parameters() const noexcept { return params_; }

  /// x: [N,3,H,W], H and W divisible by stride -> [N,5,H/stride,W/stride].
  Var<T> forward(const Var<T>& x) const {
    const auto& s = x->shape();
    if (s.size() != 4 || s[1] != 3 || s[2] % cfg_.stride != 0 || s[3] % cfg_.stride != 0)
      throw shape_error("detector: input " + shape_str(s) + " must be [N,3,H,W] with H,W divisible by " +
                        std::to_string(cfg_.stride));
    Var<T> h = x;
    for (const auto& st : stages_) h = maxpool2(detail::apply(params_, st, h));
    for (const auto& c : context_) h = detail::apply(params_, c, h);
    return detail::apply(params_, head_, h, false);
  }

 private:
  DetectorConfig cfg_;
  ParameterList<T> params_;
  std::vector<detail::ConvLayer> stages_;
  std::vector<detail::ConvLayer> context_;
  detail::ConvLayer head_;
};

using SegmenterModel = BasicSegmenter<float>;
using DetectorModel = BasicDetector<float>;

}  // namespace dseg::nn
