#pragma once

#include <cmath>
#include <span>
#include <string>

#include "dseg/core/raster.hpp"
#include "dseg/nn/ops.hpp"

namespace dseg::nn {

/// -mean[ w*y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z)) ], evaluated as
/// w*y*softplus(-z) + (1-y)*softplus(z).
template <typename T>
Var<T> weighted_bce_loss(const Var<T>& logits, const Tensor<T>& target, T w) {
  detail::require(logits->shape() == target.shape, "weighted_bce_loss",
                  "logits " + shape_str(logits->shape()) + " vs target " + shape_str(target.shape));
  if (!(w > T(0))) throw invalid_input("weighted_bce_loss: class weight must be positive");
  const auto& z = logits->value.data;
  const std::size_t n = z.size();
  T total{};
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(z[i])) throw numeric_error("weighted_bce_loss: non-finite logit at index " + std::to_string(i));
    const T y = target.data[i];
    total += w * y * softplus(-z[i]) + (T(1) - y) * softplus(z[i]);
  }
  const T inv = T(1) / static_cast<T>(n);
  return make_result<T>(Tensor<T>({1}, std::vector<T>{total * inv}), {logits},
                        [target_data = target.data, w, inv](Node<T>& self) {
                          auto& p = self.parents[0];
                          T* g = p->value.grad_buffer();
                          const T go = self.value.grad[0] * inv;
                          const auto& z = p->value.data;
                          for (std::size_t i = 0; i < z.size(); ++i) {
                            const T s = sigmoid_scalar(z[i]);
                            const T y = target_data[i];
                            g[i] += go * (w * y * (s - T(1)) + (T(1) - y) * s);
                          }
                        });
}

/// Mean over cells of -alpha_t (1-p_t)^gamma log(p_t).
template <typename T>
Var<T> focal_loss(const Var<T>& logits, const Tensor<T>& target, T alpha, T gamma) {
  detail::require(logits->shape() == target.shape, "focal_loss",
                  "logits " + shape_str(logits->shape()) + " vs target " + shape_str(target.shape));
  const auto& z = logits->value.data;
  const std::size_t n = z.size();
  T total{};
  for (std::size_t i = 0; i < n; ++i) {
    const T p = sigmoid_scalar(z[i]);
    if (target.data[i] > T(0.5)) {
      total += alpha * std::pow(T(1) - p, gamma) * softplus(-z[i]);
    } else {
      total += (T(1) - alpha) * std::pow(p, gamma) * softplus(z[i]);
    }
  }
  const T inv = T(1) / static_cast<T>(n);
  return make_result<T>(
      Tensor<T>({1}, std::vector<T>{total * inv}), {logits},
      [target_data = target.data, alpha, gamma, inv](Node<T>& self) {
        auto& node = self.parents[0];
        T* g = node->value.grad_buffer();
        const T go = self.value.grad[0] * inv;
        const auto& z = node->value.data;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const T p = sigmoid_scalar(z[i]);
          T d;
          if (target_data[i] > T(0.5)) {
            // log p = -softplus(-z)
            d = alpha * std::pow(T(1) - p, gamma) * (-gamma * p * softplus(-z[i]) - (T(1) - p));
          } else {
            d = (T(1) - alpha) * std::pow(p, gamma) * (p + gamma * (T(1) - p) * softplus(z[i]));
          }
          g[i] += go * d;
        }
      });
}

/// weight * mean |pred - target| over the 4 offsets of positive cells.
/// pred/target: [N,4,h,w]; positive: [N,1,h,w] with 0/1 entries.
template <typename T>
Var<T> box_l1_loss(const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& positive, T weight) {
  const auto& s = pred->shape();
  detail::require(s.size() == 4 && s[1] == 4, "box_l1_loss", "pred must be [N,4,h,w], got " + shape_str(s));
  detail::require(target.shape == s, "box_l1_loss", "target " + shape_str(target.shape) + " vs pred " + shape_str(s));
  detail::require(positive.shape == std::vector<int>{s[0], 1, s[2], s[3]}, "box_l1_loss",
                  "positive mask must be [N,1,h,w], got " + shape_str(positive.shape));
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  std::size_t n_pos = 0;
  T total{};
  for (int b = 0; b < s[0]; ++b)
    for (std::size_t cell = 0; cell < hw; ++cell) {
      if (positive.data[b * hw + cell] <= T(0.5)) continue;
      ++n_pos;
      for (int c = 0; c < 4; ++c) {
        const std::size_t i = (static_cast<std::size_t>(b) * 4 + c) * hw + cell;
        total += std::abs(pred->value.data[i] - target.data[i]);
      }
    }
  const T scale = n_pos ? weight / static_cast<T>(4 * n_pos) : T(0);
  return make_result<T>(
      Tensor<T>({1}, std::vector<T>{total * scale}), {pred},
      [target_data = target.data, pos = positive.data, scale, hw, nb = s[0]](Node<T>& self) {
        auto& p = self.parents[0];
        T* g = p->value.grad_buffer();
        if (scale == T(0)) return;
        const T go = self.value.grad[0] * scale;
        for (int b = 0; b < nb; ++b)
          for (std::size_t cell = 0; cell < hw; ++cell) {
            if (pos[b * hw + cell] <= T(0.5)) continue;
            for (int c = 0; c < 4; ++c) {
              const std::size_t i = (static_cast<std::size_t>(b) * 4 + c) * hw + cell;
              const T diff = p->value.data[i] - target_data[i];
              g[i] += go * (diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0)));
            }
          }
      });
}

/// Minority up-weighting factor for weighted BCE: background pixels divided
/// by wound pixels over the whole training fold.
inline double class_weight(std::span<const Mask> masks) {
  std::uint64_t fg = 0, total = 0;
  for (const auto& m : masks) {
    fg += foreground_count(m);
    total += m.pixel_count();
  }
  if (fg == 0) throw invalid_input("class_weight: fold contains no wound pixels");
  if (fg == total) throw invalid_input("class_weight: fold contains no background pixels");
  return static_cast<double>(total - fg) / static_cast<double>(fg);
}

}  // namespace dseg::nn
