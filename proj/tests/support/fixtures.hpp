// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test binaries: seeded random inputs, small traces
// and scratch directories.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gnosis/matrix.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::testing {

// Removes itself on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gnosis_test_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline MatrixD uniform_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo, double hi) {
  return MatrixD(r, c, uniform_vector(rng, r * c, lo, hi));
}

// Random nonnegative map with some exact zeros and a positive total.
inline MatrixD random_map(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixD m(k, k);
  for (auto& x : m.data) {
    const double r = u(rng);
    x = r < 0.2 ? 0.0 : r * r * r;
  }
  m.data[std::uniform_int_distribution<std::size_t>(0, k * k - 1)(rng)] += 1.0;
  return m;
}

// A valid trace with random hidden states and random unit-mass maps.
inline trace::GenerationTrace random_trace(std::mt19937_64& rng, uint32_t seq_len, uint32_t prompt_len,
                                           uint32_t dim, uint16_t layers, uint16_t heads, uint16_t grid,
                                           uint8_t label, const std::string& id = "t") {
  trace::GenerationTrace t;
  t.header.seq_len = seq_len;
  t.header.prompt_len = prompt_len;
  t.header.hidden_dim = dim;
  t.header.num_layers = layers;
  t.header.num_heads = heads;
  t.header.grid = grid;
  t.header.label = label;
  t.header.backbone_tag = "test";
  std::normal_distribution<float> n(0.0f, 1.0f);
  t.hidden.resize(t.header.hidden_count());
  for (auto& x : t.hidden) x = n(rng);
  t.attention.resize(t.header.attention_count());
  const std::size_t kk = std::size_t{grid} * grid;
  for (std::size_t m = 0; m < t.header.num_maps(); ++m) {
    const MatrixD map = random_map(rng, grid);
    double total = 0.0;
    for (double v : map.data) total += v;
    for (std::size_t i = 0; i < kk; ++i) t.attention[m * kk + i] = static_cast<float>(map.data[i] / total);
  }
  t.meta = {{"prompt_id", id}};
  return t;
}

}  // namespace gnosis::testing
