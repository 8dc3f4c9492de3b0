// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Literal evaluation of the 16 attention statistics: direct sums for every
// feature and an O(k^4) reference DFT for the spectrum.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace gnosis::oracle {

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

inline std::vector<double> dft_power(const std::vector<double>& p, std::size_t k) {
  std::vector<double> power(k * k);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t u = 0; u < k; ++u) {
    for (std::size_t v = 0; v < k; ++v) {
      double re = 0.0;
      double im = 0.0;
      for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
          const double ang = -two_pi * (static_cast<double>(u * x) / k + static_cast<double>(v * y) / k);
          re += p[x * k + y] * std::cos(ang);
          im += p[x * k + y] * std::sin(ang);
        }
      }
      power[u * k + v] = re * re + im * im;
    }
  }
  return power;
}

// Returns the features in the library's order; `map` need not be normalized.
inline std::array<double, 16> stat_features(std::vector<double> p, std::size_t k) {
  double mass = 0.0;
  for (double v : p) mass += v;
  for (double& v : p) v /= mass;
  const double kd = static_cast<double>(k);
  std::array<double, 16> f{};

  double h = 0.0;
  for (double v : p) h -= plogp(v);
  f[0] = h / std::log(kd * kd);

  auto lines = [&](bool rows, double& mean, double& sd) {
    std::vector<double> e(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      double m = 0.0;
      for (std::size_t b = 0; b < k; ++b) m += rows ? p[a * k + b] : p[b * k + a];
      if (m == 0.0) continue;
      for (std::size_t b = 0; b < k; ++b) e[a] -= plogp((rows ? p[a * k + b] : p[b * k + a]) / m);
    }
    mean = 0.0;
    for (double v : e) mean += v / kd;
    double var = 0.0;
    for (double v : e) var += (v - mean) * (v - mean) / kd;
    mean /= std::log(kd);
    sd = std::sqrt(var) / std::log(kd);
  };
  lines(true, f[1], f[2]);
  lines(false, f[3], f[4]);

  const auto power = dft_power(p, k);
  double total = 0.0;
  for (std::size_t i = 1; i < k * k; ++i) total += power[i];
  if (total > 1e-24 * power[0]) {
    double se = 0.0;
    double low = 0.0;
    double high = 0.0;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        if (u == 0 && v == 0) continue;
        // signed frequency of bin u is u or u - k, whichever is closer to 0
        const double fu = 2 * u <= k ? static_cast<double>(u) : static_cast<double>(u) - kd;
        const double fv = 2 * v <= k ? static_cast<double>(v) : static_cast<double>(v) - kd;
        const double radius = std::hypot(fu, fv);
        const double w = power[u * k + v];
        se -= plogp(w / total);
        if (radius <= kd / 8.0) low += w;
        if (radius > kd / 4.0) high += w;
      }
    }
    f[5] = se / std::log(kd * kd - 1.0);
    f[6] = low / total;
    f[7] = high / total;
  }

  const std::array<std::size_t, 4> widths = {1, 2, 4, 8};
  double cr = 0.0;
  double cc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = p[i * k + j];
      const std::size_t d = i > j ? i - j : j - i;
      if (d == 0) f[8] += v;
      for (std::size_t b = 0; b < 4; ++b) {
        if (d <= std::min(widths[b], k - 1)) f[9 + b] += v;
      }
      cr += v * static_cast<double>(i) / (kd - 1.0);
      cc += v * static_cast<double>(j) / (kd - 1.0);
    }
  }
  f[13] = cr;
  f[14] = cc;
  double var_r = 0.0;
  double var_c = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = p[i * k + j];
      var_r += v * std::pow(static_cast<double>(i) / (kd - 1.0) - cr, 2);
      var_c += v * std::pow(static_cast<double>(j) / (kd - 1.0) - cc, 2);
    }
  }
  f[15] = std::sqrt(var_r + var_c) / std::sqrt(2.0 * 0.25);
  return f;
}

}  // namespace gnosis::oracle
