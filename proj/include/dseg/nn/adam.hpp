#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dseg/core/error.hpp"
#include "dseg/nn/models.hpp"

namespace dseg::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  long step = 0;
};

/// One Adam update with bias correction. Weight decay is decoupled:
/// param <- param * (1 - lr * weight_decay) before the moment-based step.
/// Parameters without a gradient buffer are treated as having zero gradient.
template <typename T>
void adam_step(ParameterList<T>& params, AdamState<T>& state, const AdamHyper& h) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.var->size(), T{});
      state.v.emplace_back(p.var->size(), T{});
    }
  }
  if (state.m.size() != params.size()) throw invalid_input("adam_step: optimizer state does not match parameters");
  for (const auto& p : params) {
    for (T g : p.var->value.grad)
      if (!std::isfinite(g)) throw numeric_error("adam_step: non-finite gradient in " + p.name);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T decay = static_cast<T>(1.0 - h.lr * h.weight_decay);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T step_size = static_cast<T>(h.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(h.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].var->value;
    auto& m = state.m[k];
    auto& v = state.v[k];
    const bool has_grad = value.has_grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T g = has_grad ? value.grad[i] : T{};
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      value.data[i] = value.data[i] * decay - step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace dseg::nn
