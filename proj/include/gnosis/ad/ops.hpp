// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Every op validates shapes (ShapeError names
// both operands), computes its value eagerly and records a backward
// closure on the tape of its first operand.
//
// Layout conventions:
//   sequences  [T, C]          (rows are positions)
//   images     [N, C, H, W]
//   linear     y = x W + b with W stored [in, out]

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gnosis/ad/tensor.hpp"

namespace gnosis::ad {

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kLayerNormEps = 1e-5;

// Elementwise a + b. `b` may also be a vector matching a's last dimension.
template <class T>
Tensor<T> add(Tensor<T> a, Tensor<T> b);
// Elementwise a * b, same broadcasting rule as add().
template <class T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b);
template <class T>
Tensor<T> scale(Tensor<T> a, T s);

// [m,k] x [k,n] -> [m,n]
template <class T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b);
// x [n,in] (or [in]) with W [in,out] and b [out].
template <class T>
Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b);

template <class T>
Tensor<T> sum(Tensor<T> a);
template <class T>
Tensor<T> mean(Tensor<T> a);
// [r,c] -> [c]
template <class T>
Tensor<T> mean_rows(Tensor<T> a);

template <class T>
Tensor<T> sigmoid(Tensor<T> a);
// Exact (erf) form.
template <class T>
Tensor<T> gelu(Tensor<T> a);
template <class T>
Tensor<T> softmax(Tensor<T> a);  // over the last axis
template <class T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta);  // over the last axis

// x [T,C], w [C,kernel], b [C]; odd kernel, zero "same" padding.
template <class T>
Tensor<T> depthwise_conv1d(Tensor<T> x, Tensor<T> w, Tensor<T> b, std::size_t dilation);

struct Conv2dSpec {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// x [N,Cin,H,W], w [Cout,Cin,kh,kw], b [Cout] -> [N,Cout,Ho,Wo]
template <class T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> b, Conv2dSpec spec);
// [N,C,H,W] -> [N,C]
template <class T>
Tensor<T> global_avg_pool(Tensor<T> x);
// [T,C] -> [K,C] with the same bins as compress::pool_hidden; needs T >= K.
template <class T>
Tensor<T> adaptive_avg_pool1d(Tensor<T> x, std::size_t out_len);

// Scaled dot-product attention over n_heads column groups.
// q [nq,d], k [nk,d], v [nk,d] -> [nq,d]; projections are separate linears.
template <class T>
Tensor<T> multihead_attention(Tensor<T> q, Tensor<T> k, Tensor<T> v, std::size_t n_heads);

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <class T>
Tensor<T> slice(Tensor<T> a, std::size_t axis, std::size_t begin, std::size_t end);
template <class T>
Tensor<T> reshape(Tensor<T> a, Shape shape);
template <class T>
Tensor<T> transpose2d(Tensor<T> a);
// [r,c] -> [r*times, c], each row repeated `times` times in place.
template <class T>
Tensor<T> repeat_rows(Tensor<T> a, std::size_t times);
// [r,c] -> [r*times, c], the whole block stacked `times` times.
template <class T>
Tensor<T> tile_rows(Tensor<T> a, std::size_t times);

// Mean BCE of probabilities p (any shape) against labels y in {0,1}.
// p is clamped to [kBceClamp, 1 - kBceClamp].
template <class T>
Tensor<T> binary_cross_entropy(Tensor<T> p, std::span<const T> y);

}  // namespace gnosis::ad
