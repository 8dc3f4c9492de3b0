// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-budget resampling of variable-length traces.
//
// Downsampling uses adaptive average pooling: output bin j of K over an
// input axis of length S covers [floor(j*S/K), ceil((j+1)*S/K)). Upsampling
// (S < K) uses align-corners linear interpolation at j*(S-1)/(K-1).
//
// Each kernel exists as a serial reference (`*_serial`) and an OpenMP
// version. Both produce identical results: parallelism is over output rows
// and each output value is reduced in the same order.

#pragma once

#include <cstddef>
#include <span>

#include "gnosis/matrix.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::compress {

enum class HiddenMode {
  kDownsampleOnly,  // pool when S >= K, interpolate only when S < K
  kResampleAlways,  // always align-corners interpolation
};

struct HiddenBudgetConfig {
  std::size_t budget = 192;  // K_hid
  HiddenMode mode = HiddenMode::kDownsampleOnly;
};

struct AttnGridConfig {
  std::size_t grid = 256;  // k
  bool renormalize = true;
};

struct Bin {
  std::size_t begin;
  std::size_t end;  // exclusive
};

// Adaptive pooling bin j of `out` over an axis of length `in` (in >= out).
constexpr Bin pool_bin(std::size_t j, std::size_t in, std::size_t out) noexcept {
  return {(j * in) / out, ((j + 1) * in + out - 1) / out};
}

struct InterpPoint {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of `hi`
};

// Align-corners sample position j of `out` over an axis of length `in`.
InterpPoint interp_point(std::size_t j, std::size_t in, std::size_t out) noexcept;

// H [S x d] -> [K x d].
MatrixD pool_hidden(const MatrixD& hidden, const HiddenBudgetConfig& cfg);
MatrixD pool_hidden_serial(const MatrixD& hidden, const HiddenBudgetConfig& cfg);

// Float32 trace payload overload; computes in double.
MatrixD pool_hidden(std::span<const float> hidden, std::size_t seq_len, std::size_t dim,
                    const HiddenBudgetConfig& cfg);

// A [S x S] (nonnegative) -> [k x k].
MatrixD pool_attention(const MatrixD& map, const AttnGridConfig& cfg);
MatrixD pool_attention_serial(const MatrixD& map, const AttnGridConfig& cfg);

// Truncates the hidden sequence to S_x + ceil(fraction * (S - S_x)) tokens.
// Pooled attention cannot be truncated, so for fraction < 1 the attention
// comes from `prefix_payload`, a trace materialized at that fraction by the
// generator or exporter. fraction == 1 returns the input (meta updated).
trace::GenerationTrace prefix_view(const trace::GenerationTrace& full, double fraction,
                                   const trace::GenerationTrace* prefix_payload = nullptr);

std::size_t prefix_length(std::size_t seq_len, std::size_t prompt_len, double fraction);

}  // namespace gnosis::compress
