// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <omp.h>

#include "gnosis/ad/kernels.hpp"
#include "gnosis/compression.hpp"
#include "gnosis/errors.hpp"

namespace gnosis::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& want) {
  throw ShapeError(std::string(op) + ": got shape " + to_string(a) + ", expected " + want);
}

template <class T>
void require_rank(const char* op, const Tensor<T>& t, std::size_t rank) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined operand");
  if (t.rank() != rank) shape_fail(op, t.shape(), "rank " + std::to_string(rank));
}

// Broadcast mode for add/mul: 0 = same shape, 1 = b is a trailing vector.
template <class T>
int broadcast_mode(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) return 0;
  if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.dim(0)) return 1;
  shape_fail(op, a.shape(), b.shape());
}

template <class T>
Tensor<T> unary(const char* op, Tensor<T> a, T (*f)(T), T (*df)(T x, T y)) {
  const auto& x = a.values();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Node<T>* in = a.node();
  return a.tape().record(op, a.shape(), std::move(y), {a}, [in, df](Node<T>& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) in->grad[i] += out.grad[i] * df(in->value[i], out.value[i]);
  });
}

template <class T>
T sigmoid_f(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T sigmoid_df(T, T y) {
  return y * (T(1) - y);
}

template <class T>
T gelu_f(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <class T>
T gelu_df(T x, T) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  const int mode = broadcast_mode("add", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t c = bv.size();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[mode ? i % c : i];
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  return a.tape().record("add", a.shape(), std::move(y), {a, b}, [na, nb, mode, c](Node<T>& out) {
    const auto& g = out.grad;
    if (na->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += g[i];
    }
    if (nb->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) nb->grad[mode ? i % c : i] += g[i];
    }
  });
}

template <class T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
  const int mode = broadcast_mode("mul", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t c = bv.size();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * bv[mode ? i % c : i];
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  return a.tape().record("mul", a.shape(), std::move(y), {a, b}, [na, nb, mode, c](Node<T>& out) {
    const auto& g = out.grad;
    if (na->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += g[i] * nb->value[mode ? i % c : i];
    }
    if (nb->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) nb->grad[mode ? i % c : i] += g[i] * na->value[i];
    }
  });
}

template <class T>
Tensor<T> scale(Tensor<T> a, T s) {
  const auto av = a.values();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * s;
  Node<T>* na = a.node();
  return a.tape().record("scale", a.shape(), std::move(y), {a}, [na, s](Node<T>& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) na->grad[i] += out.grad[i] * s;
  });
}

template <class T>
Tensor<T> sigmoid(Tensor<T> a) {
  return unary<T>("sigmoid", a, &sigmoid_f<T>, &sigmoid_df<T>);
}

template <class T>
Tensor<T> gelu(Tensor<T> a) {
  return unary<T>("gelu", a, &gelu_f<T>, &gelu_df<T>);
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_fail("matmul", a.shape(), b.shape());
  std::vector<T> y(m * n);
  kernels::gemm_nn(a.values().data(), b.values().data(), y.data(), m, k, n, false);
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  return a.tape().record("matmul", {m, n}, std::move(y), {a, b}, [na, nb, m, k, n](Node<T>& out) {
    if (na->requires_grad) kernels::gemm_nt(out.grad.data(), nb->value.data(), na->grad.data(), m, n, k, true);
    if (nb->requires_grad) kernels::gemm_tn(na->value.data(), out.grad.data(), nb->grad.data(), k, m, n, true);
  });
}

template <class T>
Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  require_rank("linear", w, 2);
  require_rank("linear", b, 1);
  const std::size_t in = w.dim(0), outd = w.dim(1);
  if (b.dim(0) != outd) shape_fail("linear", w.shape(), b.shape());
  if (x.rank() < 1 || x.rank() > 2 || x.shape().back() != in) shape_fail("linear", x.shape(), w.shape());
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  std::vector<T> y(rows * outd);
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), y.begin() + static_cast<std::ptrdiff_t>(r * outd));
  kernels::gemm_nn(x.values().data(), w.values().data(), y.data(), rows, in, outd, true);
  Shape shape = x.rank() == 2 ? Shape{rows, outd} : Shape{outd};
  Node<T>* nx = x.node();
  Node<T>* nw = w.node();
  Node<T>* nb = b.node();
  return x.tape().record("linear", std::move(shape), std::move(y), {x, w, b},
                         [nx, nw, nb, rows, in, outd](Node<T>& out) {
                           const T* g = out.grad.data();
                           if (nx->requires_grad) kernels::gemm_nt(g, nw->value.data(), nx->grad.data(), rows, outd, in, true);
                           if (nw->requires_grad) kernels::gemm_tn(nx->value.data(), g, nw->grad.data(), in, rows, outd, true);
                           if (nb->requires_grad) {
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t j = 0; j < outd; ++j) nb->grad[j] += g[r * outd + j];
                             }
                           }
                         });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Tensor<T> sum(Tensor<T> a) {
  T s = T(0);
  for (T v : a.values()) s += v;
  Node<T>* na = a.node();
  return a.tape().record("sum", {1}, {s}, {a}, [na](Node<T>& out) {
    for (auto& g : na->grad) g += out.grad[0];
  });
}

template <class T>
Tensor<T> mean(Tensor<T> a) {
  const std::size_t n = a.numel();
  if (n == 0) shape_fail("mean", a.shape(), "non-empty");
  T s = T(0);
  for (T v : a.values()) s += v;
  Node<T>* na = a.node();
  return a.tape().record("mean", {1}, {s / static_cast<T>(n)}, {a}, [na, n](Node<T>& out) {
    const T g = out.grad[0] / static_cast<T>(n);
    for (auto& d : na->grad) d += g;
  });
}

template <class T>
Tensor<T> mean_rows(Tensor<T> a) {
  require_rank("mean_rows", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  if (r == 0) shape_fail("mean_rows", a.shape(), "at least one row");
  const auto av = a.values();
  std::vector<T> y(c, T(0));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) y[j] += av[i * c + j];
  }
  for (auto& v : y) v /= static_cast<T>(r);
  Node<T>* na = a.node();
  return a.tape().record("mean_rows", {c}, std::move(y), {a}, [na, r, c](Node<T>& out) {
    const T inv = T(1) / static_cast<T>(r);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) na->grad[i * c + j] += out.grad[j] * inv;
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization

template <class T>
Tensor<T> softmax(Tensor<T> a) {
  if (a.rank() == 0 || a.shape().back() == 0) shape_fail("softmax", a.shape(), "non-empty last axis");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  const auto av = a.values();
  std::vector<T> y(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * c;
    T* o = y.data() + r * c;
    const T mx = *std::max_element(x, x + c);
    T s = T(0);
    for (std::size_t j = 0; j < c; ++j) s += (o[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[j] /= s;
  }
  Node<T>* na = a.node();
  return a.tape().record("softmax", a.shape(), std::move(y), {a}, [na, rows, c](Node<T>& out) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = out.value.data() + r * c;
      const T* g = out.grad.data() + r * c;
      T dotpg = T(0);
      for (std::size_t j = 0; j < c; ++j) dotpg += p[j] * g[j];
      for (std::size_t j = 0; j < c; ++j) na->grad[r * c + j] += p[j] * (g[j] - dotpg);
    }
  });
}

template <class T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta) {
  require_rank("layer_norm", gamma, 1);
  if (x.rank() == 0 || x.shape().back() != gamma.dim(0)) shape_fail("layer_norm", x.shape(), gamma.shape());
  if (beta.shape() != gamma.shape()) shape_fail("layer_norm", gamma.shape(), beta.shape());
  const std::size_t c = gamma.dim(0);
  const std::size_t rows = x.numel() / c;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<T> y(xv.size());
  // xhat and 1/sigma per row, kept for backward
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * c;
    T mu = T(0);
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<T>(c);
    T var = T(0);
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(c);
    const T rs = T(1) / std::sqrt(var + T(kLayerNormEps));
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (xr[j] - mu) * rs;
      (*xhat)[r * c + j] = h;
      y[r * c + j] = h * gv[j] + bv[j];
    }
  }
  Node<T>* nx = x.node();
  Node<T>* ng = gamma.node();
  Node<T>* nb = beta.node();
  return x.tape().record("layer_norm", x.shape(), std::move(y), {x, gamma, beta},
                         [nx, ng, nb, rows, c, xhat, rstd](Node<T>& out) {
                           const auto& g = out.grad;
                           const auto& h = *xhat;
                           for (std::size_t r = 0; r < rows; ++r) {
                             const std::size_t o = r * c;
                             if (ng->requires_grad || nb->requires_grad) {
                               for (std::size_t j = 0; j < c; ++j) {
                                 if (ng->requires_grad) ng->grad[j] += g[o + j] * h[o + j];
                                 if (nb->requires_grad) nb->grad[j] += g[o + j];
                               }
                             }
                             if (!nx->requires_grad) continue;
                             T m1 = T(0), m2 = T(0);
                             for (std::size_t j = 0; j < c; ++j) {
                               const T dh = g[o + j] * ng->value[j];
                               m1 += dh;
                               m2 += dh * h[o + j];
                             }
                             m1 /= static_cast<T>(c);
                             m2 /= static_cast<T>(c);
                             for (std::size_t j = 0; j < c; ++j) {
                               const T dh = g[o + j] * ng->value[j];
                               nx->grad[o + j] += (*rstd)[r] * (dh - m1 - h[o + j] * m2);
                             }
                           }
                         });
}

// ---------------------------------------------------------------------------
// Convolutions and pooling

template <class T>
Tensor<T> depthwise_conv1d(Tensor<T> x, Tensor<T> w, Tensor<T> b, std::size_t dilation) {
  require_rank("depthwise_conv1d", x, 2);
  require_rank("depthwise_conv1d", w, 2);
  require_rank("depthwise_conv1d", b, 1);
  const std::size_t len = x.dim(0), c = x.dim(1), ks = w.dim(1);
  if (w.dim(0) != c || ks % 2 == 0) shape_fail("depthwise_conv1d", x.shape(), w.shape());
  if (b.dim(0) != c) shape_fail("depthwise_conv1d", w.shape(), b.shape());
  if (dilation == 0) throw DomainError("depthwise_conv1d: dilation must be positive");
  const auto half = static_cast<std::ptrdiff_t>(ks / 2);
  const auto dil = static_cast<std::ptrdiff_t>(dilation);
  const auto n = static_cast<std::ptrdiff_t>(len);
  const auto xv = x.values();
  const auto wv = w.values();
  const auto bv = b.values();
  std::vector<T> y(len * c);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    for (std::size_t ch = 0; ch < c; ++ch) y[static_cast<std::size_t>(t) * c + ch] = bv[ch];
    for (std::size_t j = 0; j < ks; ++j) {
      const std::ptrdiff_t s = t + (static_cast<std::ptrdiff_t>(j) - half) * dil;
      if (s < 0 || s >= n) continue;
      const T* xs = xv.data() + static_cast<std::size_t>(s) * c;
      T* yt = y.data() + static_cast<std::size_t>(t) * c;
      for (std::size_t ch = 0; ch < c; ++ch) yt[ch] += wv[ch * ks + j] * xs[ch];
    }
  }
  Node<T>* nx = x.node();
  Node<T>* nw = w.node();
  Node<T>* nb = b.node();
  return x.tape().record("depthwise_conv1d", x.shape(), std::move(y), {x, w, b},
                         [nx, nw, nb, n, c, ks, half, dil](Node<T>& out) {
                           for (std::ptrdiff_t t = 0; t < n; ++t) {
                             const T* gt = out.grad.data() + static_cast<std::size_t>(t) * c;
                             if (nb->requires_grad) {
                               for (std::size_t ch = 0; ch < c; ++ch) nb->grad[ch] += gt[ch];
                             }
                             for (std::size_t j = 0; j < ks; ++j) {
                               const std::ptrdiff_t s = t + (static_cast<std::ptrdiff_t>(j) - half) * dil;
                               if (s < 0 || s >= n) continue;
                               const std::size_t so = static_cast<std::size_t>(s) * c;
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                 if (nw->requires_grad) nw->grad[ch * ks + j] += gt[ch] * nx->value[so + ch];
                                 if (nx->requires_grad) nx->grad[so + ch] += gt[ch] * nw->value[ch * ks + j];
                               }
                             }
                           }
                         });
}

namespace {

struct ConvGeom {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
  Conv2dSpec s;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// col [cin*kh*kw, ho*wo] from one image [cin, h, w]
template <class T>
void im2col(const ConvGeom& g, const T* img, T* col) {
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t bb = 0; bb < g.kw; ++bb) {
        T* row = col + ((ci * g.kh + a) * g.kw + bb) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.s.stride_h + a) - static_cast<std::ptrdiff_t>(g.s.pad_h);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.s.stride_w + bb) - static_cast<std::ptrdiff_t>(g.s.pad_w);
            const bool in = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                            ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.wo + ox] =
                in ? img[(ci * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const ConvGeom& g, const T* col, T* img) {
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t bb = 0; bb < g.kw; ++bb) {
        const T* row = col + ((ci * g.kh + a) * g.kw + bb) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.s.stride_h + a) - static_cast<std::ptrdiff_t>(g.s.pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.s.stride_w + bb) - static_cast<std::ptrdiff_t>(g.s.pad_w);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            img[(ci * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> b, Conv2dSpec spec) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  require_rank("conv2d", b, 1);
  if (spec.stride_h == 0 || spec.stride_w == 0) throw DomainError("conv2d: stride must be positive");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0, spec};
  if (w.dim(1) != g.cin) shape_fail("conv2d", x.shape(), w.shape());
  if (b.dim(0) != g.cout) shape_fail("conv2d", w.shape(), b.shape());
  if (g.h + 2 * spec.pad_h < g.kh || g.w + 2 * spec.pad_w < g.kw) shape_fail("conv2d", x.shape(), w.shape());
  g.ho = (g.h + 2 * spec.pad_h - g.kh) / spec.stride_h + 1;
  g.wo = (g.w + 2 * spec.pad_w - g.kw) / spec.stride_w + 1;

  std::vector<T> y(g.n * g.cout * g.pixels());
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  const T* bv = b.values().data();
  const auto nimg = static_cast<std::ptrdiff_t>(g.n);
  const bool par = g.n > 1 && !omp_in_parallel() && omp_get_max_threads() > 1;
#pragma omp parallel if (par)
  {
    std::vector<T> col(g.patch() * g.pixels());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < nimg; ++i) {
      const auto im = static_cast<std::size_t>(i);
      im2col(g, xv + im * g.cin * g.h * g.w, col.data());
      T* yi = y.data() + im * g.cout * g.pixels();
      for (std::size_t co = 0; co < g.cout; ++co) std::fill_n(yi + co * g.pixels(), g.pixels(), bv[co]);
      kernels::gemm_nn_serial(wv, col.data(), yi, g.cout, g.patch(), g.pixels(), true);
    }
  }
  Node<T>* nx = x.node();
  Node<T>* nw = w.node();
  Node<T>* nb = b.node();
  return x.tape().record("conv2d", {g.n, g.cout, g.ho, g.wo}, std::move(y), {x, w, b}, [nx, nw, nb, g](Node<T>& out) {
    std::vector<T> col(g.patch() * g.pixels());
    std::vector<T> dcol(nx->requires_grad ? col.size() : 0);
    for (std::size_t im = 0; im < g.n; ++im) {
      const T* gy = out.grad.data() + im * g.cout * g.pixels();
      if (nb->requires_grad) {
        for (std::size_t co = 0; co < g.cout; ++co) {
          T s = T(0);
          for (std::size_t p = 0; p < g.pixels(); ++p) s += gy[co * g.pixels() + p];
          nb->grad[co] += s;
        }
      }
      if (nw->requires_grad) {
        im2col(g, nx->value.data() + im * g.cin * g.h * g.w, col.data());
        kernels::gemm_nt_serial(gy, col.data(), nw->grad.data(), g.cout, g.pixels(), g.patch(), true);
      }
      if (nx->requires_grad) {
        kernels::gemm_tn_serial(nw->value.data(), gy, dcol.data(), g.patch(), g.cout, g.pixels(), false);
        col2im_add(g, dcol.data(), nx->grad.data() + im * g.cin * g.h * g.w);
      }
    }
  });
}

template <class T>
Tensor<T> global_avg_pool(Tensor<T> x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) shape_fail("global_avg_pool", x.shape(), "non-empty spatial dims");
  const auto xv = x.values();
  std::vector<T> y(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    T s = T(0);
    for (std::size_t p = 0; p < hw; ++p) s += xv[i * hw + p];
    y[i] = s / static_cast<T>(hw);
  }
  Node<T>* nx = x.node();
  return x.tape().record("global_avg_pool", {n, c}, std::move(y), {x}, [nx, n, c, hw](Node<T>& out) {
    const T inv = T(1) / static_cast<T>(hw);
    for (std::size_t i = 0; i < n * c; ++i) {
      const T g = out.grad[i] * inv;
      for (std::size_t p = 0; p < hw; ++p) nx->grad[i * hw + p] += g;
    }
  });
}

template <class T>
Tensor<T> adaptive_avg_pool1d(Tensor<T> x, std::size_t out_len) {
  require_rank("adaptive_avg_pool1d", x, 2);
  const std::size_t len = x.dim(0), c = x.dim(1);
  if (out_len == 0 || len < out_len) {
    shape_fail("adaptive_avg_pool1d", x.shape(), "at least " + std::to_string(out_len) + " rows");
  }
  const auto xv = x.values();
  std::vector<T> y(out_len * c, T(0));
  for (std::size_t j = 0; j < out_len; ++j) {
    const auto bin = compress::pool_bin(j, len, out_len);
    T* yj = y.data() + j * c;
    for (std::size_t t = bin.begin; t < bin.end; ++t) {
      for (std::size_t ch = 0; ch < c; ++ch) yj[ch] += xv[t * c + ch];
    }
    const T inv = T(1) / static_cast<T>(bin.end - bin.begin);
    for (std::size_t ch = 0; ch < c; ++ch) yj[ch] *= inv;
  }
  Node<T>* nx = x.node();
  return x.tape().record("adaptive_avg_pool1d", {out_len, c}, std::move(y), {x}, [nx, len, c, out_len](Node<T>& out) {
    for (std::size_t j = 0; j < out_len; ++j) {
      const auto bin = compress::pool_bin(j, len, out_len);
      const T inv = T(1) / static_cast<T>(bin.end - bin.begin);
      for (std::size_t t = bin.begin; t < bin.end; ++t) {
        for (std::size_t ch = 0; ch < c; ++ch) nx->grad[t * c + ch] += out.grad[j * c + ch] * inv;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Attention

template <class T>
Tensor<T> multihead_attention(Tensor<T> q, Tensor<T> k, Tensor<T> v, std::size_t n_heads) {
  require_rank("multihead_attention", q, 2);
  require_rank("multihead_attention", k, 2);
  require_rank("multihead_attention", v, 2);
  const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1);
  if (k.dim(1) != d) shape_fail("multihead_attention", q.shape(), k.shape());
  if (v.shape() != k.shape()) shape_fail("multihead_attention", k.shape(), v.shape());
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("multihead_attention: width " + std::to_string(d) + " not divisible into " +
                     std::to_string(n_heads) + " heads");
  }
  const std::size_t dh = d / n_heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));

  // Head-major contiguous copies: [h][rows][dh].
  auto split = [&](std::span<const T> src, std::size_t rows) {
    std::vector<T> out(rows * d);
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src.data() + r * d + h * dh, dh, out.data() + (h * rows + r) * dh);
      }
    }
    return out;
  };
  auto qh = std::make_shared<std::vector<T>>(split(q.values(), nq));
  auto kh = std::make_shared<std::vector<T>>(split(k.values(), nk));
  auto vh = std::make_shared<std::vector<T>>(split(v.values(), nk));
  auto probs = std::make_shared<std::vector<T>>(n_heads * nq * nk);

  std::vector<T> y(nq * d);
  std::vector<T> oh(nq * dh);
  for (std::size_t h = 0; h < n_heads; ++h) {
    T* p = probs->data() + h * nq * nk;
    kernels::gemm_nt(qh->data() + h * nq * dh, kh->data() + h * nk * dh, p, nq, dh, nk, false);
    for (std::size_t r = 0; r < nq; ++r) {
      T* pr = p + r * nk;
      T mx = pr[0] * sc;
      for (std::size_t j = 0; j < nk; ++j) mx = std::max(mx, pr[j] * sc);
      T s = T(0);
      for (std::size_t j = 0; j < nk; ++j) s += (pr[j] = std::exp(pr[j] * sc - mx));
      for (std::size_t j = 0; j < nk; ++j) pr[j] /= s;
    }
    kernels::gemm_nn(p, vh->data() + h * nk * dh, oh.data(), nq, nk, dh, false);
    for (std::size_t r = 0; r < nq; ++r) std::copy_n(oh.data() + r * dh, dh, y.data() + r * d + h * dh);
  }

  Node<T>* nq_ = q.node();
  Node<T>* nk_ = k.node();
  Node<T>* nv_ = v.node();
  return q.tape().record(
      "multihead_attention", {nq, d}, std::move(y), {q, k, v},
      [nq_, nk_, nv_, qh, kh, vh, probs, nq, nk, d, dh, n_heads, sc](Node<T>& out) {
        std::vector<T> go(nq * dh), dp(nq * nk), dq(nq * dh), dk(nk * dh), dv(nk * dh);
        for (std::size_t h = 0; h < n_heads; ++h) {
          for (std::size_t r = 0; r < nq; ++r) std::copy_n(out.grad.data() + r * d + h * dh, dh, go.data() + r * dh);
          const T* p = probs->data() + h * nq * nk;
          const T* qp = qh->data() + h * nq * dh;
          const T* kp = kh->data() + h * nk * dh;
          const T* vp = vh->data() + h * nk * dh;
          // dP = dO V^T ; dV = P^T dO
          kernels::gemm_nt(go.data(), vp, dp.data(), nq, dh, nk, false);
          kernels::gemm_tn(p, go.data(), dv.data(), nk, nq, dh, false);
          // dS = P (dP - rowsum(P dP)) * scale
          for (std::size_t r = 0; r < nq; ++r) {
            T s = T(0);
            for (std::size_t j = 0; j < nk; ++j) s += p[r * nk + j] * dp[r * nk + j];
            for (std::size_t j = 0; j < nk; ++j) dp[r * nk + j] = p[r * nk + j] * (dp[r * nk + j] - s) * sc;
          }
          kernels::gemm_nn(dp.data(), kp, dq.data(), nq, nk, dh, false);
          kernels::gemm_tn(dp.data(), qp, dk.data(), nk, nq, dh, false);
          for (std::size_t r = 0; r < nq && nq_->requires_grad; ++r) {
            for (std::size_t c = 0; c < dh; ++c) nq_->grad[r * d + h * dh + c] += dq[r * dh + c];
          }
          for (std::size_t r = 0; r < nk; ++r) {
            for (std::size_t c = 0; c < dh; ++c) {
              if (nk_->requires_grad) nk_->grad[r * d + h * dh + c] += dk[r * dh + c];
              if (nv_->requires_grad) nv_->grad[r * d + h * dh + c] += dv[r * dh + c];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Layout

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) shape_fail("concat", s0, "rank > " + std::to_string(axis));
  Shape shape = s0;
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != s0.size()) shape_fail("concat", s0, p.shape());
    for (std::size_t i = 0; i < s0.size(); ++i) {
      if (i != axis && p.dim(i) != s0[i]) shape_fail("concat", s0, p.shape());
    }
    shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  const std::size_t row = shape[axis] * inner;
  std::vector<T> y(numel(shape));
  std::vector<Node<T>*> nodes;
  std::vector<std::size_t> widths, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t wdt = p.dim(axis) * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(pv.data() + o * wdt, wdt, y.data() + o * row + off);
    nodes.push_back(p.node());
    widths.push_back(wdt);
    offsets.push_back(off);
    off += wdt;
  }
  return parts[0].tape().record("concat", std::move(shape), std::move(y), parts,
                                [nodes, widths, offsets, outer, row](Node<T>& out) {
                                  for (std::size_t i = 0; i < nodes.size(); ++i) {
                                    if (!nodes[i]->requires_grad) continue;
                                    for (std::size_t o = 0; o < outer; ++o) {
                                      const T* g = out.grad.data() + o * row + offsets[i];
                                      T* d = nodes[i]->grad.data() + o * widths[i];
                                      for (std::size_t j = 0; j < widths[i]; ++j) d[j] += g[j];
                                    }
                                  }
                                });
}

template <class T>
Tensor<T> slice(Tensor<T> a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " invalid for shape " + to_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t src_row = a.dim(axis) * inner, dst_row = (end - begin) * inner, off = begin * inner;
  const auto av = a.values();
  std::vector<T> y(outer * dst_row);
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(av.data() + o * src_row + off, dst_row, y.data() + o * dst_row);
  Node<T>* na = a.node();
  return a.tape().record("slice", std::move(shape), std::move(y), {a}, [na, outer, src_row, dst_row, off](Node<T>& out) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < dst_row; ++j) na->grad[o * src_row + off + j] += out.grad[o * dst_row + j];
    }
  });
}

template <class T>
Tensor<T> reshape(Tensor<T> a, Shape shape) {
  if (numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
  const auto av = a.values();
  Node<T>* na = a.node();
  return a.tape().record("reshape", std::move(shape), std::vector<T>(av.begin(), av.end()), {a}, [na](Node<T>& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) na->grad[i] += out.grad[i];
  });
}

template <class T>
Tensor<T> transpose2d(Tensor<T> a) {
  require_rank("transpose2d", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto av = a.values();
  std::vector<T> y(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = av[i * c + j];
  }
  Node<T>* na = a.node();
  return a.tape().record("transpose2d", {c, r}, std::move(y), {a}, [na, r, c](Node<T>& out) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) na->grad[i * c + j] += out.grad[j * r + i];
    }
  });
}

template <class T>
Tensor<T> repeat_rows(Tensor<T> a, std::size_t times) {
  require_rank("repeat_rows", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto av = a.values();
  std::vector<T> y(r * times * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t t = 0; t < times; ++t) std::copy_n(av.data() + i * c, c, y.data() + (i * times + t) * c);
  }
  Node<T>* na = a.node();
  return a.tape().record("repeat_rows", {r * times, c}, std::move(y), {a}, [na, r, c, times](Node<T>& out) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t j = 0; j < c; ++j) na->grad[i * c + j] += out.grad[(i * times + t) * c + j];
      }
    }
  });
}

template <class T>
Tensor<T> tile_rows(Tensor<T> a, std::size_t times) {
  require_rank("tile_rows", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1), n = r * c;
  const auto av = a.values();
  std::vector<T> y(n * times);
  for (std::size_t t = 0; t < times; ++t) std::copy_n(av.data(), n, y.data() + t * n);
  Node<T>* na = a.node();
  return a.tape().record("tile_rows", {r * times, c}, std::move(y), {a}, [na, n, times](Node<T>& out) {
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t i = 0; i < n; ++i) na->grad[i] += out.grad[t * n + i];
    }
  });
}

// ---------------------------------------------------------------------------
// Loss

template <class T>
Tensor<T> binary_cross_entropy(Tensor<T> p, std::span<const T> y) {
  const std::size_t n = p.numel();
  if (y.size() != n || n == 0) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(n) + " predictions vs " + std::to_string(y.size()) +
                     " labels");
  }
  for (T yi : y) {
    if (yi != T(0) && yi != T(1)) throw DomainError("binary_cross_entropy: labels must be 0 or 1");
  }
  const T lo = static_cast<T>(kBceClamp);
  const T hi = T(1) - lo;
  const auto pv = p.values();
  std::vector<T> pc(n);
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    pc[i] = std::clamp(pv[i], lo, hi);
    loss -= y[i] * std::log(pc[i]) + (T(1) - y[i]) * std::log(T(1) - pc[i]);
  }
  loss /= static_cast<T>(n);
  Node<T>* np = p.node();
  std::vector<T> ys(y.begin(), y.end());
  // Gradient is taken at the clamped probability, so saturated predictions
  // still receive a finite signal.
  return p.tape().record("binary_cross_entropy", {1}, {loss}, {p},
                         [np, pc = std::move(pc), ys = std::move(ys), n](Node<T>& out) {
                           const T g = out.grad[0] / static_cast<T>(n);
                           for (std::size_t i = 0; i < n; ++i) {
                             np->grad[i] += g * ((pc[i] - ys[i]) / (pc[i] * (T(1) - pc[i])));
                           }
                         });
}

// ---------------------------------------------------------------------------

#define GNOSIS_INSTANTIATE(T)                                                                             \
  template Tensor<T> add<T>(Tensor<T>, Tensor<T>);                                                        \
  template Tensor<T> mul<T>(Tensor<T>, Tensor<T>);                                                        \
  template Tensor<T> scale<T>(Tensor<T>, T);                                                              \
  template Tensor<T> matmul<T>(Tensor<T>, Tensor<T>);                                                     \
  template Tensor<T> linear<T>(Tensor<T>, Tensor<T>, Tensor<T>);                                          \
  template Tensor<T> sum<T>(Tensor<T>);                                                                   \
  template Tensor<T> mean<T>(Tensor<T>);                                                                  \
  template Tensor<T> mean_rows<T>(Tensor<T>);                                                             \
  template Tensor<T> sigmoid<T>(Tensor<T>);                                                               \
  template Tensor<T> gelu<T>(Tensor<T>);                                                                  \
  template Tensor<T> softmax<T>(Tensor<T>);                                                               \
  template Tensor<T> layer_norm<T>(Tensor<T>, Tensor<T>, Tensor<T>);                                      \
  template Tensor<T> depthwise_conv1d<T>(Tensor<T>, Tensor<T>, Tensor<T>, std::size_t);                   \
  template Tensor<T> conv2d<T>(Tensor<T>, Tensor<T>, Tensor<T>, Conv2dSpec);                              \
  template Tensor<T> global_avg_pool<T>(Tensor<T>);                                                       \
  template Tensor<T> adaptive_avg_pool1d<T>(Tensor<T>, std::size_t);                                      \
  template Tensor<T> multihead_attention<T>(Tensor<T>, Tensor<T>, Tensor<T>, std::size_t);                \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);                               \
  template Tensor<T> slice<T>(Tensor<T>, std::size_t, std::size_t, std::size_t);                          \
  template Tensor<T> reshape<T>(Tensor<T>, Shape);                                                        \
  template Tensor<T> transpose2d<T>(Tensor<T>);                                                           \
  template Tensor<T> repeat_rows<T>(Tensor<T>, std::size_t);                                              \
  template Tensor<T> tile_rows<T>(Tensor<T>, std::size_t);                                                \
  template Tensor<T> binary_cross_entropy<T>(Tensor<T>, std::span<const T>);

GNOSIS_INSTANTIATE(float)
GNOSIS_INSTANTIATE(double)

#undef GNOSIS_INSTANTIATE

}  // namespace gnosis::ad
