#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dseg/nn/tensor.hpp"

namespace dseg::nn {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw shape_error(std::string(op) + ": " + what);
}

inline void require_nchw(const std::vector<int>& s, const char* op) {
  require(s.size() == 4, op, "expected NCHW input, got " + shape_str(s));
}

// col layout: row (ci*k + ky)*k + kx, column y*out_w + x; rows are `ld`
// apart so several samples can share one column matrix.
template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, int pad, T* col, std::size_t ld) {
  const int out_h = h + 2 * pad - k + 1;
  const int out_w = w + 2 * pad - k + 1;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ld;
        for (int y = 0; y < out_h; ++y) {
          const int sy = y + ky - pad;
          T* row = dst + static_cast<std::size_t>(y) * out_w;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + out_w, T{});
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * h + sy) * w;
          const int x0 = std::max(0, pad - kx);
          const int x1 = std::min(out_w, w + pad - kx);
          std::fill(row, row + x0, T{});
          if (x1 > x0) std::copy(src + x0 + kx - pad, src + x1 + kx - pad, row + x0);
          std::fill(row + std::max(x0, x1), row + out_w, T{});
        }
      }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int pad, T* img, std::size_t ld) {
  const int out_h = h + 2 * pad - k + 1;
  const int out_w = w + 2 * pad - k + 1;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ld;
        for (int y = 0; y < out_h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * out_w;
          T* dst = img + (static_cast<std::size_t>(c) * h + sy) * w;
          const int x0 = std::max(0, pad - kx);
          const int x1 = std::min(out_w, w + pad - kx);
          for (int x = x0; x < x1; ++x) dst[x + kx - pad] += row[x];
        }
      }
}

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a->shape() == b->shape(), op, "shape mismatch " + shape_str(a->shape()) + " vs " + shape_str(b->shape()));
}

}  // namespace detail

/// Stride-1 convolution with square kernel `k` and zero padding `pad`.
/// x: [N,Ci,H,W], weight: [Co,Ci,k,k], bias: [Co]. Samples are processed in
/// chunks whose im2col columns are laid side by side so each chunk is a
/// single GEMM.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int pad) {
  using namespace detail;
  const auto& xs = x->shape();
  const auto& ws = weight->shape();
  require_nchw(xs, "conv2d");
  require(ws.size() == 4 && ws[2] == ws[3], "conv2d", "weight must be [Co,Ci,k,k], got " + shape_str(ws));
  require(ws[1] == xs[1], "conv2d",
          "input has " + std::to_string(xs[1]) + " channels, weight expects " + std::to_string(ws[1]));
  require(bias->shape() == std::vector<int>{ws[0]}, "conv2d", "bias must be [Co], got " + shape_str(bias->shape()));
  const int n = xs[0], ci = xs[1], h = xs[2], w = xs[3];
  const int co = ws[0], k = ws[2];
  const int oh = h + 2 * pad - k + 1, ow = w + 2 * pad - k + 1;
  require(oh > 0 && ow > 0, "conv2d", "kernel larger than padded input");
  const int kdim = ci * k * k;
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  const std::size_t in_sz = static_cast<std::size_t>(ci) * h * w;
  const int chunk = static_cast<int>(std::clamp<std::size_t>(4096 / ohw, 1, static_cast<std::size_t>(n)));

  Tensor<T> out({n, co, oh, ow});
  {
    std::vector<T> col(static_cast<std::size_t>(kdim) * chunk * ohw);
    RowMat<T> res(co, static_cast<Eigen::Index>(chunk * ohw));
    CMapMat<T> wm(weight->value.data.data(), co, kdim);
    for (int b0 = 0; b0 < n; b0 += chunk) {
      const int nb = std::min(chunk, n - b0);
      const std::size_t ld = nb * ohw;
      for (int b = 0; b < nb; ++b)
        im2col(x->value.data.data() + (b0 + b) * in_sz, ci, h, w, k, pad, col.data() + b * ohw, ld);
      auto r = res.leftCols(static_cast<Eigen::Index>(ld));
      r.noalias() = wm * CMapMat<T>(col.data(), kdim, static_cast<Eigen::Index>(ld));
      for (int b = 0; b < nb; ++b)
        for (int c = 0; c < co; ++c) {
          const T bc = bias->value.data[c];
          const T* src = res.data() + static_cast<std::size_t>(c) * res.cols() + b * ohw;
          T* dst = out.data.data() + (static_cast<std::size_t>(b0 + b) * co + c) * ohw;
          for (std::size_t p = 0; p < ohw; ++p) dst[p] = src[p] + bc;
        }
    }
  }

  return make_result<T>(std::move(out), {x, weight, bias}, [=](Node<T>& self) {
    const T* gout = self.value.grad.data();
    const auto& xn = self.parents[0];
    const auto& wn = self.parents[1];
    const auto& bn = self.parents[2];
    std::vector<T> col(static_cast<std::size_t>(kdim) * chunk * ohw);
    RowMat<T> g(co, static_cast<Eigen::Index>(chunk * ohw));
    CMapMat<T> wm(wn->value.data.data(), co, kdim);
    for (int b0 = 0; b0 < n; b0 += chunk) {
      const int nb = std::min(chunk, n - b0);
      const std::size_t ld = nb * ohw;
      for (int b = 0; b < nb; ++b)
        for (int c = 0; c < co; ++c) {
          const T* src = gout + (static_cast<std::size_t>(b0 + b) * co + c) * ohw;
          std::copy(src, src + ohw, g.data() + static_cast<std::size_t>(c) * g.cols() + b * ohw);
        }
      Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> gm(g.data(), co, static_cast<Eigen::Index>(ld),
                                                             Eigen::OuterStride<>(g.cols()));
      if (bn->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(bn->value.grad_buffer(), co);
        gb += gm.rowwise().sum();
      }
      if (wn->requires_grad) {
        for (int b = 0; b < nb; ++b)
          im2col(xn->value.data.data() + (b0 + b) * in_sz, ci, h, w, k, pad, col.data() + b * ohw, ld);
        MapMat<T> gw(wn->value.grad_buffer(), co, kdim);
        gw.noalias() += gm * CMapMat<T>(col.data(), kdim, static_cast<Eigen::Index>(ld)).transpose();
      }
      if (xn->requires_grad) {
        MapMat<T>(col.data(), kdim, static_cast<Eigen::Index>(ld)).noalias() = wm.transpose() * gm;
        T* gx = xn->value.grad_buffer();
        for (int b = 0; b < nb; ++b)
          col2im_add(col.data() + b * ohw, ci, h, w, k, pad, gx + (b0 + b) * in_sz, ld);
      }
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x->shape());
  const auto& in = x->value.data;
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in[i] > T(0) ? in[i] : T(0);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& p = self.parents[0];
    T* g = p->value.grad_buffer();
    const auto& in = p->value.data;
    const auto& go = self.value.grad;
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in[i] > T(0)) g[i] += go[i];
  });
}

template <typename T>
T sigmoid_scalar(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <typename T>
T softplus(T z) {
  return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = sigmoid_scalar(x->value.data[i]);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    T* g = self.parents[0]->value.grad_buffer();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const T s = self.value.data[i];
      g[i] += self.value.grad[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "add");
  Tensor<T> out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      T* g = p->value.grad_buffer();
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.value.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "mul");
  Tensor<T> out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      T* g = pa->value.grad_buffer();
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.value.grad[i] * pb->value.data[i];
    }
    if (pb->requires_grad) {
      T* g = pb->value.grad_buffer();
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.value.grad[i] * pa->value.data[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s{};
  for (T v : x->value.data) s += v;
  return make_result<T>(Tensor<T>({1}, std::vector<T>{s}), {x}, [](Node<T>& self) {
    auto& p = self.parents[0];
    T* g = p->value.grad_buffer();
    const T go = self.value.grad[0];
    for (std::size_t i = 0; i < p->size(); ++i) g[i] += go;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  detail::require(x->size() > 0, "mean", "empty tensor");
  T s{};
  for (T v : x->value.data) s += v;
  const T inv = T(1) / static_cast<T>(x->size());
  return make_result<T>(Tensor<T>({1}, std::vector<T>{s * inv}), {x}, [inv](Node<T>& self) {
    auto& p = self.parents[0];
    T* g = p->value.grad_buffer();
    const T go = self.value.grad[0] * inv;
    for (std::size_t i = 0; i < p->size(); ++i) g[i] += go;
  });
}

/// 2x2 max pooling, stride 2. H and W must be even.
template <typename T>
Var<T> maxpool2(const Var<T>& x) {
  const auto& s = x->shape();
  detail::require_nchw(s, "maxpool2");
  detail::require(s[2] % 2 == 0 && s[3] % 2 == 0, "maxpool2", "spatial size must be even, got " + shape_str(s));
  const int nc = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Tensor<T> out({s[0], s[1], oh, ow});
  std::vector<std::uint32_t> arg(out.size());
  const T* in = x->value.data.data();
  for (int p = 0; p < nc; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * w + 2 * xx;
        for (std::size_t cand : {best + 1, best + w, best + w + 1})
          if (in[cand] > in[best]) best = cand;
        const std::size_t o = (static_cast<std::size_t>(p) * oh + y) * ow + xx;
        out.data[o] = in[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
  }
  return make_result<T>(std::move(out), {x}, [arg = std::move(arg)](Node<T>& self) {
    T* g = self.parents[0]->value.grad_buffer();
    for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.value.grad[o];
  });
}

/// Nearest-neighbour x2 upsampling.
template <typename T>
Var<T> upsample2(const Var<T>& x) {
  const auto& s = x->shape();
  detail::require_nchw(s, "upsample2");
  const int nc = s[0] * s[1], h = s[2], w = s[3];
  Tensor<T> out({s[0], s[1], 2 * h, 2 * w});
  const T* in = x->value.data.data();
  for (int p = 0; p < nc; ++p)
    for (int y = 0; y < 2 * h; ++y) {
      const T* src = in + (static_cast<std::size_t>(p) * h + y / 2) * w;
      T* dst = out.data.data() + (static_cast<std::size_t>(p) * 2 * h + y) * 2 * w;
      for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  return make_result<T>(std::move(out), {x}, [nc, h, w](Node<T>& self) {
    T* g = self.parents[0]->value.grad_buffer();
    const T* go = self.value.grad.data();
    for (int p = 0; p < nc; ++p)
      for (int y = 0; y < 2 * h; ++y) {
        const T* src = go + (static_cast<std::size_t>(p) * 2 * h + y) * 2 * w;
        T* dst = g + (static_cast<std::size_t>(p) * h + y / 2) * w;
        for (int xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
      }
  });
}

/// Concatenation along the channel axis.
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const auto& sa = a->shape();
  const auto& sb = b->shape();
  detail::require_nchw(sa, "concat_channels");
  detail::require_nchw(sb, "concat_channels");
  detail::require(sa[0] == sb[0] && sa[2] == sb[2] && sa[3] == sb[3], "concat_channels",
                  "incompatible " + shape_str(sa) + " and " + shape_str(sb));
  const int n = sa[0], ca = sa[1], cb = sb[1];
  const std::size_t hw = static_cast<std::size_t>(sa[2]) * sa[3];
  Tensor<T> out({n, ca + cb, sa[2], sa[3]});
  for (int i = 0; i < n; ++i) {
    const T* pa = a->value.data.data() + i * ca * hw;
    const T* pb = b->value.data.data() + i * cb * hw;
    T* dst = out.data.data() + i * (ca + cb) * hw;
    std::copy(pa, pa + ca * hw, dst);
    std::copy(pb, pb + cb * hw, dst + ca * hw);
  }
  return make_result<T>(std::move(out), {a, b}, [n, ca, cb, hw](Node<T>& self) {
    const T* go = self.value.grad.data();
    auto& na = self.parents[0];
    auto& nb = self.parents[1];
    for (int i = 0; i < n; ++i) {
      const T* src = go + i * (ca + cb) * hw;
      if (na->requires_grad) {
        T* g = na->value.grad_buffer() + i * ca * hw;
        for (std::size_t j = 0; j < ca * hw; ++j) g[j] += src[j];
      }
      if (nb->requires_grad) {
        T* g = nb->value.grad_buffer() + i * cb * hw;
        for (std::size_t j = 0; j < cb * hw; ++j) g[j] += src[ca * hw + j];
      }
    }
  });
}

/// Channels [begin, end) of an NCHW tensor.
template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int end) {
  const auto& s = x->shape();
  detail::require_nchw(s, "slice_channels");
  detail::require(0 <= begin && begin < end && end <= s[1], "slice_channels",
                  "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " + shape_str(s));
  const int n = s[0], c = s[1], k = end - begin;
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> out({n, k, s[2], s[3]});
  for (int b = 0; b < n; ++b) {
    const T* src = x->value.data.data() + (static_cast<std::size_t>(b) * c + begin) * hw;
    std::copy(src, src + k * hw, out.data.data() + static_cast<std::size_t>(b) * k * hw);
  }
  return make_result<T>(std::move(out), {x}, [n, c, k, begin, hw](Node<T>& self) {
    T* g = self.parents[0]->value.grad_buffer();
    for (int b = 0; b < n; ++b) {
      const T* src = self.value.grad.data() + static_cast<std::size_t>(b) * k * hw;
      T* dst = g + (static_cast<std::size_t>(b) * c + begin) * hw;
      for (std::size_t i = 0; i < k * hw; ++i) dst[i] += src[i];
    }
  });
}

}  // namespace dseg::nn
