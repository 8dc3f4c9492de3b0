// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "gnosis/attn_stats.hpp"
#include "gnosis/errors.hpp"
#include "oracles/stats_oracle.hpp"
#include "support/fixtures.hpp"

using namespace gnosis;
using namespace gnosis::stats;

namespace {

MatrixD transpose(const MatrixD& m) {
  MatrixD t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  }
  return t;
}

}  // namespace

TEST_CASE("uniform map") {
  for (std::size_t k : {2, 5, 8, 32}) {
    const auto f = stat_features(MatrixD(k, k, 1.0));
    CHECK(f[kMapEntropyNorm] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f[kCenterRow] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f[kCenterCol] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f[kDiagRatio] == doctest::Approx(1.0 / k).epsilon(1e-12));
    CHECK(f[kRowEntropyMean] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f[kRowEntropyStd] == doctest::Approx(0.0));
    CHECK(f[kSpectralEntropyNorm] == 0.0);
  }
}

TEST_CASE("point mass at the origin") {
  MatrixD m(6, 6);
  m(0, 0) = 4.0;
  const auto f = stat_features(m);
  CHECK(f[kMapEntropyNorm] == 0.0);
  CHECK(f[kCenterRow] == 0.0);
  CHECK(f[kCenterCol] == 0.0);
  CHECK(f[kSpreadRms] == 0.0);
  CHECK(f[kDiagRatio] == 1.0);
}

TEST_CASE("scaled identity") {
  MatrixD m(7, 7);
  for (std::size_t i = 0; i < 7; ++i) m(i, i) = 1.0 / 7;
  const auto f = stat_features(m, true);
  CHECK(f[kDiagRatio] == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t w = kBandRatioW1; w <= kBandRatioW8; ++w) CHECK(f[w] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f[kRowEntropyMean] == 0.0);
  CHECK(f[kColEntropyMean] == 0.0);
}

TEST_CASE("fixed 4x4 map matches the literal oracle") {
  const std::vector<double> m = {.4, .1, 0, 0, .1, .2, .05, 0, 0, .05, .05, 0, 0, 0, 0, .05};
  const auto f = stat_features(m, 4);
  const auto ref = oracle::stat_features(m, 4);
  for (std::size_t i = 0; i < kNumStats; ++i) {
    INFO(kStatNames[i]);
    CHECK(std::abs(f[i] - ref[i]) <= 1e-10);
  }
  // band w clipped to k-1 = 3 covers everything from w4 on
  CHECK(f[kBandRatioW4] == doctest::Approx(1.0));
}

TEST_CASE("random maps: oracle agreement, range and invariances") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> side(2, 16);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = side(rng);
    const MatrixD m = gnosis::testing::random_map(rng, k);
    const auto f = stat_features(m);
    const auto ref = oracle::stat_features(m.data, k);
    for (std::size_t i = 0; i < kNumStats; ++i) {
      INFO("k=" << k << " " << kStatNames[i]);
      CHECK(std::abs(f[i] - ref[i]) <= 1e-10);
      CHECK(f[i] >= 0.0);
      CHECK(f[i] <= 1.0);
    }
    CHECK(f[kDiagRatio] <= f[kBandRatioW1]);
    CHECK(f[kBandRatioW1] <= f[kBandRatioW2]);
    CHECK(f[kBandRatioW2] <= f[kBandRatioW4]);
    CHECK(f[kBandRatioW4] <= f[kBandRatioW8]);

    MatrixD scaled = m;
    const double c = scale(rng);
    for (double& v : scaled.data) v *= c;
    const auto fs = stat_features(scaled);
    for (std::size_t i = 0; i < kNumStats; ++i) CHECK(std::abs(fs[i] - f[i]) <= 1e-12);

    const auto ft = stat_features(transpose(m));
    CHECK(std::abs(ft[kRowEntropyMean] - f[kColEntropyMean]) <= 1e-12);
    CHECK(std::abs(ft[kRowEntropyStd] - f[kColEntropyStd]) <= 1e-12);
    CHECK(std::abs(ft[kColEntropyMean] - f[kRowEntropyMean]) <= 1e-12);
    CHECK(std::abs(ft[kCenterRow] - f[kCenterCol]) <= 1e-12);
    CHECK(std::abs(ft[kCenterCol] - f[kCenterRow]) <= 1e-12);
    for (std::size_t i : {kMapEntropyNorm, kDiagRatio, kBandRatioW1, kBandRatioW2, kBandRatioW4, kBandRatioW8,
                          kSpreadRms, kSpectralEntropyNorm}) {
      CHECK(std::abs(ft[i] - f[i]) <= 1e-12);
    }
  }
}

TEST_CASE("power spectrum: FFT path agrees with the reference DFT") {
  std::mt19937_64 rng(22);
  for (std::size_t k : {4, 8, 16}) {
    const MatrixD m = gnosis::testing::random_map(rng, k);
    const MatrixD p = power_spectrum(m.data, k);
    const auto ref = oracle::dft_power(m.data, k);
    for (std::size_t i = 0; i < k * k; ++i) CHECK(std::abs(p.data[i] - ref[i]) <= 1e-9);
  }
}

TEST_CASE("invalid maps") {
  CHECK_THROWS_AS(stat_features(MatrixD(3, 3, 0.0)), DegenerateError);
  CHECK_THROWS_AS(stat_features(MatrixD(1, 1, 1.0)), DomainError);
  MatrixD neg(3, 3, 1.0);
  neg(0, 1) = -1.0;
  CHECK_THROWS_AS(stat_features(neg), ValidationError);
}

TEST_CASE("batch rows equal the per-map features in layer-major order") {
  std::mt19937_64 rng(23);
  const std::size_t k = 8;
  const std::size_t n = 6;
  std::vector<float> maps(n * k * k);
  for (std::size_t m = 0; m < n; ++m) {
    const MatrixD map = gnosis::testing::random_map(rng, k);
    for (std::size_t i = 0; i < k * k; ++i) maps[m * k * k + i] = static_cast<float>(map.data[i]);
  }
  const MatrixD batch = stat_features_batch(maps, n, k, 3);
  CHECK(batch == stat_features_batch_serial(maps, n, k, 3));
  for (std::size_t m = 0; m < n; ++m) {
    std::vector<double> one(maps.begin() + m * k * k, maps.begin() + (m + 1) * k * k);
    const auto f = stat_features(one, k);
    for (std::size_t i = 0; i < kNumStats; ++i) CHECK(batch(m, i) == f[i]);
  }
}

TEST_CASE("batch of point masses") {
  const std::size_t k = 4;
  std::vector<float> maps(4 * k * k, 0.0f);
  const std::size_t cells[4][2] = {{0, 0}, {3, 3}, {0, 3}, {2, 1}};
  for (std::size_t m = 0; m < 4; ++m) maps[m * k * k + cells[m][0] * k + cells[m][1]] = 1.0f;
  const MatrixD b = stat_features_batch(maps, 4, k, 2);
  for (std::size_t m = 0; m < 4; ++m) {
    CHECK(b(m, kMapEntropyNorm) == 0.0);
    CHECK(b(m, kCenterRow) == doctest::Approx(cells[m][0] / 3.0));
    CHECK(b(m, kCenterCol) == doctest::Approx(cells[m][1] / 3.0));
  }
}

TEST_CASE("batch error names the layer and head") {
  const std::size_t k = 3;
  std::vector<float> maps(4 * k * k, 1.0f);
  std::fill(maps.begin() + 3 * k * k, maps.end(), 0.0f);
  try {
    stat_features_batch(maps, 4, k, 2);
    FAIL("degenerate map accepted");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("(layer 1, head 1)") != std::string::npos);
  }
}
