// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/attn_stats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "gnosis/errors.hpp"

namespace gnosis::stats {

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx w = std::polar(1.0, ang * static_cast<double>(j));
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

void dft_inplace(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  std::vector<cplx> out(n);
  for (std::size_t u = 0; u < n; ++u) {
    cplx s = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((u * x) % n) / static_cast<double>(n);
      s += a[x] * std::polar(1.0, ang);
    }
    out[u] = s;
  }
  a.swap(out);
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

struct LineEntropy {
  double mean;
  double std;
};

// Entropy of each normalized row (by_rows) or column; zero-mass lines give 0.
LineEntropy line_entropies(std::span<const double> p, std::size_t k, bool by_rows) {
  std::vector<double> h(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double mass = 0.0;
    for (std::size_t b = 0; b < k; ++b) mass += by_rows ? p[a * k + b] : p[b * k + a];
    if (!(mass > 0.0)) continue;
    double e = 0.0;
    for (std::size_t b = 0; b < k; ++b) e -= xlogx((by_rows ? p[a * k + b] : p[b * k + a]) / mass);
    h[a] = e;
  }
  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double v : h) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k);
  const double lnk = std::log(static_cast<double>(k));
  return {mean / lnk, std::sqrt(var) / lnk};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

StatFeatureVector compute(std::span<const double> p, std::size_t k) {
  StatFeatureVector f{};
  const double kd = static_cast<double>(k);

  double h = 0.0;
  for (double v : p) h -= xlogx(v);
  f[kMapEntropyNorm] = h / std::log(kd * kd);

  const auto rows = line_entropies(p, k, true);
  const auto cols = line_entropies(p, k, false);
  f[kRowEntropyMean] = rows.mean;
  f[kRowEntropyStd] = rows.std;
  f[kColEntropyMean] = cols.mean;
  f[kColEntropyStd] = cols.std;

  const MatrixD power = power_spectrum(p, k);
  double total = 0.0;
  for (std::size_t i = 1; i < power.data.size(); ++i) total += power.data[i];
  if (total > kFlatSpectrumTolerance * power.data[0]) {
    double se = 0.0;
    double low = 0.0;
    double high = 0.0;
    const double low_cut = kd / 8.0;
    const double high_cut = kd / 4.0;
    for (std::size_t u = 0; u < k; ++u) {
      const double fu = u <= k / 2 ? static_cast<double>(u) : static_cast<double>(u) - kd;
      for (std::size_t v = 0; v < k; ++v) {
        if (u == 0 && v == 0) continue;
        const double fv = v <= k / 2 ? static_cast<double>(v) : static_cast<double>(v) - kd;
        const double pw = power(u, v);
        se -= xlogx(pw / total);
        const double radius = std::sqrt(fu * fu + fv * fv);
        if (radius <= low_cut) low += pw;
        if (radius > high_cut) high += pw;
      }
    }
    f[kSpectralEntropyNorm] = se / std::log(kd * kd - 1.0);
    f[kLowfreqEnergyRatio] = low / total;
    f[kHighfreqEnergyRatio] = high / total;
  }

  double diag = 0.0;
  std::array<double, kBandWidths.size()> band{};
  double cr = 0.0;
  double cc = 0.0;
  const double scale = 1.0 / (kd - 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = p[i * k + j];
      const std::size_t off = i > j ? i - j : j - i;
      if (off == 0) diag += v;
      for (std::size_t b = 0; b < kBandWidths.size(); ++b) {
        if (off <= std::min(kBandWidths[b], k - 1)) band[b] += v;
      }
      cr += v * static_cast<double>(i) * scale;
      cc += v * static_cast<double>(j) * scale;
    }
  }
  double vr = 0.0;
  double vc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = p[i * k + j];
      const double dr = static_cast<double>(i) * scale - cr;
      const double dc = static_cast<double>(j) * scale - cc;
      vr += v * dr * dr;
      vc += v * dc * dc;
    }
  }
  f[kDiagRatio] = diag;
  for (std::size_t b = 0; b < kBandWidths.size(); ++b) f[kBandRatioW1 + b] = band[b];
  f[kCenterRow] = cr;
  f[kCenterCol] = cc;
  f[kSpreadRms] = std::sqrt((vr + vc) / (2.0 * 0.25));

  // Rounding can push sums of unit mass a few ulps past 1.
  for (double& v : f) v = clamp01(v);
  return f;
}

void check_map(std::span<const double> map, std::size_t k) {
  if (k < 2) throw DomainError("stat_features: k must be >= 2");
  if (map.size() != k * k) {
    throw ShapeError("stat_features: expected " + std::to_string(k * k) + " values, got " +
                     std::to_string(map.size()));
  }
}

}  // namespace

MatrixD power_spectrum(std::span<const double> map, std::size_t k) {
  std::vector<cplx> grid(map.begin(), map.end());
  std::vector<cplx> line(k);
  auto transform = [&](std::vector<cplx>& a) {
    if (is_pow2(k)) {
      fft_inplace(a);
    } else {
      dft_inplace(a);
    }
  };
  for (std::size_t r = 0; r < k; ++r) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(r * k), k, line.begin());
    transform(line);
    std::copy_n(line.begin(), k, grid.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < k; ++r) line[r] = grid[r * k + c];
    transform(line);
    for (std::size_t r = 0; r < k; ++r) grid[r * k + c] = line[r];
  }
  MatrixD power(k, k);
  for (std::size_t i = 0; i < k * k; ++i) power.data[i] = std::norm(grid[i]);
  return power;
}

StatFeatureVector stat_features(std::span<const double> map, std::size_t k, bool normalized) {
  check_map(map, k);
  double mass = 0.0;
  for (double v : map) {
    if (!std::isfinite(v)) throw ValidationError("stat_features: non-finite entry");
    if (v < 0.0) throw ValidationError("stat_features: negative entry");
    mass += v;
  }
  if (!(mass > 0.0)) throw DegenerateError("stat_features: map has zero total mass");
  if (normalized) return compute(map, k);
  std::vector<double> p(map.begin(), map.end());
  for (double& v : p) v /= mass;
  return compute(p, k);
}

StatFeatureVector stat_features(const MatrixD& map, bool normalized) {
  if (map.rows != map.cols) throw ShapeError("stat_features: map must be square");
  return stat_features(map.data, map.rows, normalized);
}

namespace {

void batch_row(std::span<const float> maps, std::size_t m, std::size_t k, std::size_t num_heads,
               MatrixD& out) {
  const std::size_t kk = k * k;
  std::vector<double> p(maps.begin() + static_cast<std::ptrdiff_t>(m * kk),
                        maps.begin() + static_cast<std::ptrdiff_t>((m + 1) * kk));
  StatFeatureVector f;
  try {
    f = stat_features(p, k, false);
  } catch (const Error& e) {
    std::string where = num_heads ? "(layer " + std::to_string(m / num_heads) + ", head " +
                                        std::to_string(m % num_heads) + ")"
                                  : "map " + std::to_string(m);
    throw DegenerateError("stat_features_batch: " + where + ": " + e.what());
  }
  std::copy(f.begin(), f.end(), out.row(m).begin());
}

void check_batch(std::span<const float> maps, std::size_t num_maps, std::size_t k) {
  if (maps.size() != num_maps * k * k) throw ShapeError("stat_features_batch: buffer size mismatch");
}

}  // namespace

MatrixD stat_features_batch_serial(std::span<const float> maps, std::size_t num_maps, std::size_t k,
                                   std::size_t num_heads) {
  check_batch(maps, num_maps, k);
  MatrixD out(num_maps, kNumStats);
  for (std::size_t m = 0; m < num_maps; ++m) batch_row(maps, m, k, num_heads, out);
  return out;
}

MatrixD stat_features_batch(std::span<const float> maps, std::size_t num_maps, std::size_t k,
                            std::size_t num_heads) {
  check_batch(maps, num_maps, k);
  MatrixD out(num_maps, kNumStats);
  // Exceptions cannot cross the parallel region; keep the lowest failing map.
  std::string first_error;
  std::size_t first_bad = num_maps;
  const auto n = static_cast<std::ptrdiff_t>(num_maps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t m = 0; m < n; ++m) {
    try {
      batch_row(maps, static_cast<std::size_t>(m), k, num_heads, out);
    } catch (const Error& e) {
#pragma omp critical(gnosis_stats_error)
      if (static_cast<std::size_t>(m) < first_bad) {
        first_bad = static_cast<std::size_t>(m);
        first_error = e.what();
      }
    }
  }
  if (first_bad < num_maps) throw DegenerateError(first_error);
  return out;
}

}  // namespace gnosis::stats
