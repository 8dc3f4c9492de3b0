// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/compression.hpp"

#include <cmath>
#include <string>

#include "gnosis/errors.hpp"

namespace gnosis::compress {

InterpPoint interp_point(std::size_t j, std::size_t in, std::size_t out) noexcept {
  if (in == 1 || out == 1) return {0, 0, 0.0};
  const double pos = static_cast<double>(j) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  if (lo >= in - 1) return {in - 1, in - 1, 0.0};
  return {lo, lo + 1, pos - static_cast<double>(lo)};
}

namespace {

void check_hidden(const MatrixD& h, const HiddenBudgetConfig& cfg) {
  if (cfg.budget < 2) throw DomainError("K_hid must be >= 2");
  if (h.rows == 0) throw ValidationError("pool_hidden: empty input (S = 0)");
  if (h.cols == 0) throw ValidationError("pool_hidden: zero feature dimension");
  for (double v : h.data) {
    if (!std::isfinite(v)) throw ValidationError("pool_hidden: non-finite input");
  }
}

bool use_pooling(std::size_t seq, const HiddenBudgetConfig& cfg) {
  return cfg.mode == HiddenMode::kDownsampleOnly && seq >= cfg.budget;
}

void hidden_row(const MatrixD& h, std::size_t j, const HiddenBudgetConfig& cfg, std::span<double> out) {
  const std::size_t S = h.rows;
  const std::size_t d = h.cols;
  if (use_pooling(S, cfg)) {
    const Bin b = pool_bin(j, S, cfg.budget);
    for (std::size_t c = 0; c < d; ++c) out[c] = 0.0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const auto r = h.row(i);
      for (std::size_t c = 0; c < d; ++c) out[c] += r[c];
    }
    const double inv = 1.0 / static_cast<double>(b.end - b.begin);
    for (std::size_t c = 0; c < d; ++c) out[c] *= inv;
  } else {
    const InterpPoint p = interp_point(j, S, cfg.budget);
    const auto lo = h.row(p.lo);
    const auto hi = h.row(p.hi);
    for (std::size_t c = 0; c < d; ++c) out[c] = lo[c] + p.frac * (hi[c] - lo[c]);
  }
}

void check_attention(const MatrixD& a, const AttnGridConfig& cfg) {
  if (cfg.grid < 2) throw DomainError("attention grid k must be >= 2");
  if (a.rows == 0 || a.rows != a.cols) {
    throw ShapeError("pool_attention: expected a square S x S map, got " + std::to_string(a.rows) + " x " +
                     std::to_string(a.cols));
  }
  for (double v : a.data) {
    if (!std::isfinite(v)) throw ValidationError("pool_attention: non-finite entry");
    if (v < 0.0) throw ValidationError("pool_attention: negative entry");
  }
}

// Separable resampling weights for one axis: a list of (index, weight).
struct AxisTap {
  std::size_t index;
  double weight;
};

std::vector<std::vector<AxisTap>> axis_taps(std::size_t in, std::size_t out) {
  std::vector<std::vector<AxisTap>> taps(out);
  for (std::size_t j = 0; j < out; ++j) {
    if (in >= out) {
      const Bin b = pool_bin(j, in, out);
      const double w = 1.0 / static_cast<double>(b.end - b.begin);
      for (std::size_t i = b.begin; i < b.end; ++i) taps[j].push_back({i, w});
    } else {
      const InterpPoint p = interp_point(j, in, out);
      taps[j].push_back({p.lo, 1.0 - p.frac});
      if (p.hi != p.lo) taps[j].push_back({p.hi, p.frac});
    }
  }
  return taps;
}

double attention_cell(const MatrixD& a, const std::vector<AxisTap>& rt, const std::vector<AxisTap>& ct,
                      bool pooling) {
  if (pooling) {
    // Block mean: sum then divide once, so exact bin means stay exact.
    double s = 0.0;
    for (const auto& r : rt) {
      const auto row = a.row(r.index);
      for (const auto& c : ct) s += row[c.index];
    }
    return s / static_cast<double>(rt.size() * ct.size());
  }
  double s = 0.0;
  for (const auto& r : rt) {
    const auto row = a.row(r.index);
    double acc = 0.0;
    for (const auto& c : ct) acc += c.weight * row[c.index];
    s += r.weight * acc;
  }
  return s;
}

void renormalize(MatrixD& out) {
  double mass = 0.0;
  for (double v : out.data) mass += v;
  if (!(mass > 0.0)) throw DegenerateError("pool_attention: map has zero total mass");
  for (double& v : out.data) v /= mass;
}

}  // namespace

MatrixD pool_hidden_serial(const MatrixD& hidden, const HiddenBudgetConfig& cfg) {
  check_hidden(hidden, cfg);
  MatrixD out(cfg.budget, hidden.cols);
  for (std::size_t j = 0; j < cfg.budget; ++j) hidden_row(hidden, j, cfg, out.row(j));
  return out;
}

MatrixD pool_hidden(const MatrixD& hidden, const HiddenBudgetConfig& cfg) {
  check_hidden(hidden, cfg);
  MatrixD out(cfg.budget, hidden.cols);
  const auto K = static_cast<std::ptrdiff_t>(cfg.budget);
#pragma omp parallel for schedule(static) if (hidden.rows * hidden.cols > 65536)
  for (std::ptrdiff_t j = 0; j < K; ++j) {
    hidden_row(hidden, static_cast<std::size_t>(j), cfg, out.row(static_cast<std::size_t>(j)));
  }
  return out;
}

MatrixD pool_hidden(std::span<const float> hidden, std::size_t seq_len, std::size_t dim,
                    const HiddenBudgetConfig& cfg) {
  if (hidden.size() != seq_len * dim) throw ShapeError("pool_hidden: buffer size does not match S x D");
  MatrixD h(seq_len, dim, std::vector<double>(hidden.begin(), hidden.end()));
  return pool_hidden(h, cfg);
}

MatrixD pool_attention_serial(const MatrixD& map, const AttnGridConfig& cfg) {
  check_attention(map, cfg);
  const auto taps = axis_taps(map.rows, cfg.grid);
  const bool pooling = map.rows >= cfg.grid;
  MatrixD out(cfg.grid, cfg.grid);
  for (std::size_t r = 0; r < cfg.grid; ++r) {
    for (std::size_t c = 0; c < cfg.grid; ++c) out(r, c) = attention_cell(map, taps[r], taps[c], pooling);
  }
  if (cfg.renormalize) renormalize(out);
  return out;
}

MatrixD pool_attention(const MatrixD& map, const AttnGridConfig& cfg) {
  check_attention(map, cfg);
  const auto taps = axis_taps(map.rows, cfg.grid);
  const bool pooling = map.rows >= cfg.grid;
  MatrixD out(cfg.grid, cfg.grid);
  const auto k = static_cast<std::ptrdiff_t>(cfg.grid);
#pragma omp parallel for schedule(static) if (map.rows > 256)
  for (std::ptrdiff_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < cfg.grid; ++c) {
      out(static_cast<std::size_t>(r), c) = attention_cell(map, taps[static_cast<std::size_t>(r)], taps[c], pooling);
    }
  }
  if (cfg.renormalize) renormalize(out);
  return out;
}

std::size_t prefix_length(std::size_t seq_len, std::size_t prompt_len, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("prefix fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t response = seq_len - prompt_len;
  const double kept = fraction * static_cast<double>(response);
  if (kept < 1.0) {
    throw DomainError("prefix fraction " + std::to_string(fraction) + " keeps less than one response token");
  }
  // Guard against representation error, e.g. 0.4 * 10 = 4.000000000000001.
  auto tokens = static_cast<std::size_t>(std::ceil(kept - 1e-9));
  return prompt_len + std::min(tokens, response);
}

trace::GenerationTrace prefix_view(const trace::GenerationTrace& full, double fraction,
                                   const trace::GenerationTrace* prefix_payload) {
  const auto& h = full.header;
  const std::size_t len = prefix_length(h.seq_len, h.prompt_len, fraction);
  trace::GenerationTrace out = full;
  if (fraction == 1.0) {
    out.meta["prefix_fraction"] = 1.0;
    return out;
  }
  if (prefix_payload == nullptr) {
    throw ValidationError("prefix_view: no attention payload materialized for fraction " +
                          std::to_string(fraction) + " of trace '" + full.prompt_id() + "'");
  }
  const auto& ph = prefix_payload->header;
  if (trace::Geometry::of(ph) != trace::Geometry::of(h)) {
    throw ValidationError("prefix_view: payload geometry " + trace::Geometry::of(ph).describe() +
                          " differs from trace " + trace::Geometry::of(h).describe());
  }
  const auto stored = prefix_payload->prefix_fraction();
  if (!stored || trace::fraction_key(*stored) != trace::fraction_key(fraction)) {
    throw ValidationError("prefix_view: payload was materialized for a different fraction");
  }
  if (ph.seq_len != len) {
    throw ValidationError("prefix_view: payload has S=" + std::to_string(ph.seq_len) + ", expected " +
                          std::to_string(len));
  }
  out.header.seq_len = static_cast<uint32_t>(len);
  out.hidden.assign(full.hidden.begin(), full.hidden.begin() + static_cast<std::ptrdiff_t>(len * h.hidden_dim));
  out.attention = prefix_payload->attention;
  out.meta["prefix_fraction"] = fraction;
  return out;
}

}  // namespace gnosis::compress
