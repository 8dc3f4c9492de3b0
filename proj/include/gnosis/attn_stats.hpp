// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interpretable per-map attention statistics: 16 features in [0, 1] covering
// dispersion (entropies), spectral texture, diagonal locality and the
// center/spread of the attention mass. All entropies use natural logs with
// 0 log 0 = 0.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "gnosis/matrix.hpp"

namespace gnosis::stats {

inline constexpr std::size_t kNumStats = 16;

enum StatIndex : std::size_t {
  kMapEntropyNorm = 0,
  kRowEntropyMean,
  kRowEntropyStd,
  kColEntropyMean,
  kColEntropyStd,
  kSpectralEntropyNorm,
  kLowfreqEnergyRatio,
  kHighfreqEnergyRatio,
  kDiagRatio,
  kBandRatioW1,
  kBandRatioW2,
  kBandRatioW4,
  kBandRatioW8,
  kCenterRow,
  kCenterCol,
  kSpreadRms,
};

inline constexpr std::array<std::string_view, kNumStats> kStatNames = {
    "map_entropy_norm",      "row_entropy_mean",     "row_entropy_std",      "col_entropy_mean",
    "col_entropy_std",       "spectral_entropy_norm", "lowfreq_energy_ratio", "highfreq_energy_ratio",
    "diag_ratio",            "band_ratio_w1",        "band_ratio_w2",        "band_ratio_w4",
    "band_ratio_w8",         "center_row",           "center_col",           "spread_rms",
};

inline constexpr std::array<std::size_t, 4> kBandWidths = {1, 2, 4, 8};

// Non-DC spectral power below this fraction of the DC power counts as none
// (a flat map); the spectral features are then all 0.
inline constexpr double kFlatSpectrumTolerance = 1e-24;

using StatFeatureVector = std::array<double, kNumStats>;

// `map` is k x k, nonnegative with positive mass. If `normalized` is false
// the map is rescaled to unit mass first.
StatFeatureVector stat_features(std::span<const double> map, std::size_t k, bool normalized = false);
StatFeatureVector stat_features(const MatrixD& map, bool normalized = false);

// maps: [num_maps x k x k] contiguous, (layer-major, head-minor).
// Returns [num_maps x 16]. Degenerate maps raise DegenerateError naming
// (layer, head) when `num_heads` is given.
MatrixD stat_features_batch(std::span<const float> maps, std::size_t num_maps, std::size_t k,
                            std::size_t num_heads = 0);
MatrixD stat_features_batch_serial(std::span<const float> maps, std::size_t num_maps, std::size_t k,
                                   std::size_t num_heads = 0);

// |F(u,v)|^2 of the 2D DFT of a k x k real map (radix-2 FFT when k is a
// power of two, direct per-axis DFT otherwise).
MatrixD power_spectrum(std::span<const double> map, std::size_t k);

}  // namespace gnosis::stats
