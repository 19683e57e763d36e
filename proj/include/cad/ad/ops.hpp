#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cad/ad/graph.hpp"

// Differentiable primitives. Spatial tensors are laid out (channel, r, phi);
// the phi axis is periodic.
namespace cad::ad {

namespace detail {

template <typename T>
Tensor<T>* input_grad(Node<T>& self, std::size_t i) {
  Node<T>& in = *self.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    fail(ErrorCode::ShapeMismatch,
         std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  Index outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, Index axis, const char* op) {
  if (axis < 0 || axis >= static_cast<Index>(s.size())) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": axis out of range for " + shape_str(s));
  }
  AxisSplit a;
  for (Index i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) a.inner *= s[i];
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape(), (a.value().array() + b.value().array()).eval());
  return make_op<T>("add", std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (auto* g = detail::input_grad(self, i)) g->array() += self.grad.array();
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape(), (a.value().array() - b.value().array()).eval());
  return make_op<T>("sub", std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) g->array() += self.grad.array();
    if (auto* g = detail::input_grad(self, 1)) g->array() -= self.grad.array();
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape(), (a.value().array() * b.value().array()).eval());
  return make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = self.inputs[0]->value.array();
    const auto& bv = self.inputs[1]->value.array();
    if (auto* g = detail::input_grad(self, 0)) g->array() += self.grad.array() * bv;
    if (auto* g = detail::input_grad(self, 1)) g->array() += self.grad.array() * av;
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a.shape(), (a.value().array() * s).eval());
  return make_op<T>("scale", std::move(out), {a}, [s](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) g->array() += self.grad.array() * s;
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out(a.shape(), a.value().array().max(T(0)).eval());
  return make_op<T>("relu", std::move(out), {a}, [](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      g->array() += (self.value.array() > T(0)).select(self.grad.array(), T(0));
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out(a.shape(), (T(1) / (T(1) + (-a.value().array()).exp())).eval());
  return make_op<T>("sigmoid", std::move(out), {a}, [](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      const auto& y = self.value.array();
      g->array() += self.grad.array() * y * (T(1) - y);
    }
  });
}

// log(max(a, floor)); no gradient flows where the clamp is active.
template <typename T>
Var<T> log_clamped(const Var<T>& a, T floor) {
  Tensor<T> out(a.shape(), a.value().array().max(floor).log().eval());
  return make_op<T>("log_clamped", std::move(out), {a}, [floor](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      const auto& x = self.inputs[0]->value.array();
      g->array() += (x > floor).select(self.grad.array() / x, T(0));
    }
  });
}

// ------------------------------------------------------------------ reductions

template <typename T>
Var<T> sum(const Var<T>& a) {
  return make_op<T>("sum", Tensor<T>::scalar(a.value().array().sum()), {a}, [](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) g->array() += self.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

// Full contraction of two same-shape tensors.
template <typename T>
Var<T> dot(const Var<T>& q, const Var<T>& k) {
  detail::require_same_shape(q.shape(), k.shape(), "dot");
  const T v = (q.value().array() * k.value().array()).sum();
  return make_op<T>("dot", Tensor<T>::scalar(v), {q, k}, [](Node<T>& self) {
    const T g = self.grad[0];
    if (auto* gq = detail::input_grad(self, 0)) gq->array() += g * self.inputs[1]->value.array();
    if (auto* gk = detail::input_grad(self, 1)) gk->array() += g * self.inputs[0]->value.array();
  });
}

// Sum along one axis, keeping it with length 1.
template <typename T>
Var<T> sum_axis(const Var<T>& a, Index axis) {
  const auto s = detail::split_axis(a.shape(), axis, "sum_axis");
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  Tensor<T> out(out_shape, T(0));
  const T* x = a.value().data();
  for (Index o = 0; o < s.outer; ++o)
    for (Index l = 0; l < s.len; ++l)
      for (Index i = 0; i < s.inner; ++i) out[o * s.inner + i] += x[(o * s.len + l) * s.inner + i];
  return make_op<T>("sum_axis", std::move(out), {a}, [s](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      for (Index o = 0; o < s.outer; ++o)
        for (Index l = 0; l < s.len; ++l)
          for (Index i = 0; i < s.inner; ++i) (*g)[(o * s.len + l) * s.inner + i] += self.grad[o * s.inner + i];
    }
  });
}

// ------------------------------------------------------------------ reshaping

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value();
  out.reshape(std::move(shape));
  return make_op<T>("reshape", std::move(out), {a}, [](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) g->array() += self.grad.array();
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  detail::require_rank(a.shape(), 2, "transpose");
  const Index rows = a.dim(0), cols = a.dim(1);
  Tensor<T> out(Shape{cols, rows});
  out.matrix(cols, rows) = a.value().matrix(rows, cols).transpose();
  return make_op<T>("transpose", std::move(out), {a}, [rows, cols](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      g->matrix(rows, cols) += self.grad.matrix(cols, rows).transpose();
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, Index axis) {
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "concat of zero tensors");
  Shape out_shape = xs.front().shape();
  if (axis < 0 || axis >= static_cast<Index>(out_shape.size())) {
    fail(ErrorCode::ShapeMismatch, "concat: axis out of range");
  }
  Index total = 0;
  for (const auto& x : xs) {
    Shape probe = x.shape();
    if (probe.size() != out_shape.size()) fail(ErrorCode::ShapeMismatch, "concat: rank mismatch");
    total += probe[axis];
    probe[axis] = out_shape[axis];
    detail::require_same_shape(probe, out_shape, "concat");
  }
  out_shape[axis] = total;
  const auto s = detail::split_axis(out_shape, axis, "concat");
  Tensor<T> out(out_shape);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const Index len = x.dim(axis);
    for (Index o = 0; o < s.outer; ++o) {
      std::copy_n(x.value().data() + o * len * s.inner, len * s.inner,
                  out.data() + (o * s.len + off) * s.inner);
    }
    off += len;
  }
  return make_op<T>("concat", std::move(out), xs, [s, offsets](Node<T>& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto* g = detail::input_grad(self, k);
      if (!g) continue;
      const Index len = g->size() / (s.outer * s.inner);
      for (Index o = 0; o < s.outer; ++o) {
        Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> dst(g->data() + o * len * s.inner, len * s.inner);
        Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> src(
            self.grad.data() + (o * s.len + offsets[k]) * s.inner, len * s.inner);
        dst += src;
      }
    }
  });
}

// Slice index k of axis 0, dropping that axis.
template <typename T>
Var<T> select(const Var<T>& a, Index k) {
  if (a.shape().empty() || k < 0 || k >= a.dim(0)) fail(ErrorCode::IndexOutOfRange, "select: index out of range");
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  const Index n = numel(out_shape);
  Tensor<T> out(out_shape);
  std::copy_n(a.value().data() + k * n, n, out.data());
  return make_op<T>("select", std::move(out), {a}, [k, n](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(g->data() + k * n, n) += self.grad.array();
    }
  });
}

// Stacks same-shape tensors along a new leading axis.
template <typename T>
Var<T> stack(const std::vector<Var<T>>& xs) {
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "stack of zero tensors");
  std::vector<Var<T>> expanded;
  expanded.reserve(xs.size());
  for (const auto& x : xs) {
    Shape s = x.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(x, s));
  }
  return concat(expanded, 0);
}

// Elementwise maximum over same-shape tensors; ties go to the earliest input.
template <typename T>
Var<T> maximum(const std::vector<Var<T>>& xs) {
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "maximum of zero tensors");
  for (const auto& x : xs) detail::require_same_shape(x.shape(), xs.front().shape(), "maximum");
  Tensor<T> out = xs.front().value();
  std::vector<int> src(static_cast<std::size_t>(out.size()), 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const T* v = xs[k].value().data();
    for (Index i = 0; i < out.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        src[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
    }
  }
  return make_op<T>("maximum", std::move(out), xs, [src = std::move(src)](Node<T>& self) {
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (auto* g = detail::input_grad(self, static_cast<std::size_t>(src[i]))) {
        (*g)[static_cast<Index>(i)] += self.grad[static_cast<Index>(i)];
      }
    }
  });
}

// -------------------------------------------------------------- dense layers

// x (N, Cin), weight (Cout, Cin), bias (Cout) -> (N, Cout).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  detail::require_rank(x.shape(), 2, "linear");
  detail::require_rank(weight.shape(), 2, "linear");
  const Index n = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
  if (weight.dim(1) != cin || bias.shape() != Shape{cout}) {
    fail(ErrorCode::ShapeMismatch, "linear: x " + shape_str(x.shape()) + ", weight " +
                                       shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  Tensor<T> out(Shape{n, cout});
  auto y = out.matrix(n, cout);
  y.noalias() = x.value().matrix(n, cin) * weight.value().matrix(cout, cin).transpose();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), cout);
  return make_op<T>("linear", std::move(out), {x, weight, bias}, [n, cin, cout](Node<T>& self) {
    const auto gy = self.grad.matrix(n, cout);
    if (auto* g = detail::input_grad(self, 0)) {
      g->matrix(n, cin).noalias() += gy * self.inputs[1]->value.matrix(cout, cin);
    }
    if (auto* g = detail::input_grad(self, 1)) {
      g->matrix(cout, cin).noalias() += gy.transpose() * self.inputs[0]->value.matrix(n, cin);
    }
    if (auto* g = detail::input_grad(self, 2)) {
      g->matrix(1, cout) += gy.colwise().sum();
    }
  });
}

// Softmax along `axis`, computed with the max-shift for stability.
template <typename T>
Var<T> softmax_axis(const Var<T>& x, Index axis) {
  const auto s = detail::split_axis(x.shape(), axis, "softmax_axis");
  Tensor<T> out(x.shape());
  const T* in = x.value().data();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.len * s.inner + i;
      T m = -std::numeric_limits<T>::infinity();
      for (Index l = 0; l < s.len; ++l) m = std::max(m, in[base + l * s.inner]);
      T z = 0;
      for (Index l = 0; l < s.len; ++l) {
        const T e = std::exp(in[base + l * s.inner] - m);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (Index l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return make_op<T>("softmax", std::move(out), {x}, [s](Node<T>& self) {
    auto* g = detail::input_grad(self, 0);
    if (!g) return;
    const T* y = self.value.data();
    const T* gy = self.grad.data();
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.len * s.inner + i;
        T inner = 0;
        for (Index l = 0; l < s.len; ++l) inner += gy[base + l * s.inner] * y[base + l * s.inner];
        for (Index l = 0; l < s.len; ++l) {
          const Index at = base + l * s.inner;
          (*g)[at] += y[at] * (gy[at] - inner);
        }
      }
    }
  });
}

// ----------------------------------------------------------- spatial (C,H,W)

namespace detail {

struct ConvGeometry {
  Index cin, h, w, cout, kh, kw, stride, ho, wo;
  Index pad_r() const { return kh / 2; }
  Index pad_phi() const { return kw / 2; }
  Index patch() const { return cin * kh * kw; }
};

inline Index wrap(Index i, Index n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Patch matrix (cin*kh*kw, ho*wo): zero padding along r, wrap-around along phi.
template <typename T>
void im2col_polar(const T* x, const ConvGeometry& g, T* col) {
  const Index npix = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        T* row = col + ((c * g.kh + a) * g.kw + b) * npix;
        for (Index i = 0; i < g.ho; ++i) {
          const Index r = i * g.stride + a - g.pad_r();
          T* dst = row + i * g.wo;
          if (r < 0 || r >= g.h) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = x + (c * g.h + r) * g.w;
          for (Index j = 0; j < g.wo; ++j) dst[j] = src[wrap(j * g.stride + b - g.pad_phi(), g.w)];
        }
      }
    }
  }
}

template <typename T>
void col2im_polar(const T* col, const ConvGeometry& g, T* gx) {
  const Index npix = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        const T* row = col + ((c * g.kh + a) * g.kw + b) * npix;
        for (Index i = 0; i < g.ho; ++i) {
          const Index r = i * g.stride + a - g.pad_r();
          if (r < 0 || r >= g.h) continue;
          T* dst = gx + (c * g.h + r) * g.w;
          const T* src = row + i * g.wo;
          for (Index j = 0; j < g.wo; ++j) dst[wrap(j * g.stride + b - g.pad_phi(), g.w)] += src[j];
        }
      }
    }
  }
}

}  // namespace detail

// x (Cin, H, W), kernel (Cout, Cin, kh, kw) with odd kh, kw, bias (Cout).
// Output (Cout, H/stride, W/stride).
template <typename T>
Var<T> conv2d_polar(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, Index stride = 1) {
  detail::require_rank(x.shape(), 3, "conv2d_polar");
  detail::require_rank(kernel.shape(), 4, "conv2d_polar");
  detail::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, 0, 0};
  if (kernel.dim(1) != g.cin || bias.shape() != Shape{g.cout} || g.kh % 2 == 0 || g.kw % 2 == 0 ||
      (stride != 1 && stride != 2) || g.h % stride != 0 || g.w % stride != 0) {
    fail(ErrorCode::ShapeMismatch, "conv2d_polar: x " + shape_str(x.shape()) + ", kernel " +
                                       shape_str(kernel.shape()) + ", stride " + std::to_string(stride));
  }
  g.ho = g.h / stride;
  g.wo = g.w / stride;
  const Index npix = g.ho * g.wo;
  const bool pointwise = g.kh == 1 && g.kw == 1 && stride == 1;

  Tensor<T> col;
  if (!pointwise) {
    col = Tensor<T>(Shape{g.patch(), npix});
    detail::im2col_polar(x.value().data(), g, col.data());
  }
  const Tensor<T>& patches = pointwise ? x.value() : col;

  Tensor<T> out(Shape{g.cout, g.ho, g.wo});
  auto y = out.matrix(g.cout, npix);
  y.noalias() = kernel.value().matrix(g.cout, g.patch()) * patches.matrix(g.patch(), npix);
  y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.value().data(), g.cout);

  return make_op<T>("conv2d_polar", std::move(out), {x, kernel, bias},
                    [g, npix, pointwise, col = std::move(col)](Node<T>& self) {
                      const auto gy = self.grad.matrix(g.cout, npix);
                      const Tensor<T>& patches = pointwise ? self.inputs[0]->value : col;
                      if (auto* gk = detail::input_grad(self, 1)) {
                        gk->matrix(g.cout, g.patch()).noalias() +=
                            gy * patches.matrix(g.patch(), npix).transpose();
                      }
                      if (auto* gb = detail::input_grad(self, 2)) {
                        gb->matrix(g.cout, 1) += gy.rowwise().sum();
                      }
                      if (auto* gx = detail::input_grad(self, 0)) {
                        const auto kmat = self.inputs[1]->value.matrix(g.cout, g.patch());
                        if (pointwise) {
                          gx->matrix(g.cin, npix).noalias() += kmat.transpose() * gy;
                        } else {
                          RowMatrix<T> gcol = kmat.transpose() * gy;
                          detail::col2im_polar(gcol.data(), g, gx->data());
                        }
                      }
                    });
}

// 2x2 max pooling, stride 2; ties resolve to the first element in row-major order.
template <typename T>
Var<T> maxpool2d(const Var<T>& x, Index factor = 2) {
  detail::require_rank(x.shape(), 3, "maxpool2d");
  const Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (factor != 2 || h % 2 || w % 2) fail(ErrorCode::ShapeMismatch, "maxpool2d needs even spatial dims");
  const Index ho = h / 2, wo = w / 2;
  Tensor<T> out(Shape{c, ho, wo});
  std::vector<Index> arg(static_cast<std::size_t>(out.size()));
  const T* in = x.value().data();
  for (Index ch = 0; ch < c; ++ch) {
    for (Index i = 0; i < ho; ++i) {
      for (Index j = 0; j < wo; ++j) {
        Index best = (ch * h + 2 * i) * w + 2 * j;
        for (Index a = 0; a < 2; ++a)
          for (Index b = 0; b < 2; ++b) {
            const Index at = (ch * h + 2 * i + a) * w + 2 * j + b;
            if (in[at] > in[best]) best = at;
          }
        const Index o = (ch * ho + i) * wo + j;
        out[o] = in[best];
        arg[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return make_op<T>("maxpool2d", std::move(out), {x}, [arg = std::move(arg)](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      for (std::size_t o = 0; o < arg.size(); ++o) (*g)[arg[o]] += self.grad[static_cast<Index>(o)];
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, Index factor = 2) {
  detail::require_rank(x.shape(), 3, "upsample_nearest");
  if (factor != 2) fail(ErrorCode::ShapeMismatch, "upsample_nearest supports factor 2");
  const Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out(Shape{c, 2 * h, 2 * w});
  const T* in = x.value().data();
  for (Index ch = 0; ch < c; ++ch)
    for (Index i = 0; i < 2 * h; ++i)
      for (Index j = 0; j < 2 * w; ++j) out[(ch * 2 * h + i) * 2 * w + j] = in[(ch * h + i / 2) * w + j / 2];
  return make_op<T>("upsample_nearest", std::move(out), {x}, [c, h, w](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < 2 * h; ++i)
          for (Index j = 0; j < 2 * w; ++j)
            (*g)[(ch * h + i / 2) * w + j / 2] += self.grad[(ch * 2 * h + i) * 2 * w + j];
    }
  });
}

// x (C, H, W) scaled per location by w (1, H, W).
template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& w) {
  detail::require_rank(x.shape(), 3, "scale_channels");
  if (w.shape() != Shape{1, x.dim(1), x.dim(2)}) {
    fail(ErrorCode::ShapeMismatch, "scale_channels: weight " + shape_str(w.shape()) + " for " + shape_str(x.shape()));
  }
  const Index c = x.dim(0), hw = x.dim(1) * x.dim(2);
  Tensor<T> out(x.shape());
  out.matrix(c, hw) = x.value().matrix(c, hw).array().rowwise() * w.value().matrix(1, hw).row(0).array();
  return make_op<T>("scale_channels", std::move(out), {x, w}, [c, hw](Node<T>& self) {
    const auto gy = self.grad.matrix(c, hw).array();
    if (auto* g = detail::input_grad(self, 0)) {
      g->matrix(c, hw).array() += gy.rowwise() * self.inputs[1]->value.matrix(1, hw).row(0).array();
    }
    if (auto* g = detail::input_grad(self, 1)) {
      g->matrix(1, hw).array() += (gy * self.inputs[0]->value.matrix(c, hw).array()).colwise().sum();
    }
  });
}

// Channelwise max of point features grouped by pillar id. Empty pillars are
// zero; the gradient flows only to the winning point of each channel.
template <typename T>
Var<T> scatter_max(const Var<T>& features, std::span<const int> ids, Index n_pillars) {
  detail::require_rank(features.shape(), 2, "scatter_max");
  const Index n = features.dim(0), c = features.dim(1);
  if (static_cast<Index>(ids.size()) != n) fail(ErrorCode::ShapeMismatch, "scatter_max: one id per point required");
  Tensor<T> out(Shape{n_pillars, c}, T(0));
  std::vector<Index> arg(static_cast<std::size_t>(n_pillars * c), -1);
  const T* f = features.value().data();
  for (Index p = 0; p < n; ++p) {
    const Index id = ids[static_cast<std::size_t>(p)];
    if (id < 0 || id >= n_pillars) fail(ErrorCode::IndexOutOfRange, "scatter_max: pillar id out of range");
    for (Index ch = 0; ch < c; ++ch) {
      Index& a = arg[static_cast<std::size_t>(id * c + ch)];
      const T v = f[p * c + ch];
      if (a < 0 || v > out[id * c + ch]) {
        a = p * c + ch;
        out[id * c + ch] = v;
      }
    }
  }
  return make_op<T>("scatter_max", std::move(out), {features}, [arg = std::move(arg)](Node<T>& self) {
    if (auto* g = detail::input_grad(self, 0)) {
      for (std::size_t o = 0; o < arg.size(); ++o) {
        if (arg[o] >= 0) (*g)[arg[o]] += self.grad[static_cast<Index>(o)];
      }
    }
  });
}

}  // namespace cad::ad
