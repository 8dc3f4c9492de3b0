// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gnosis/ad/params.hpp"

namespace gnosis::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a flat ParamStore. Moments share the store's
// layout. Gradients are read, never cleared.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, T(0)), v_(size, T(0)) {}

  // `mask`, when non-empty, selects which flat entries are updated.
  void step(ParamStore<T>& params, std::span<const uint8_t> mask = {});

  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  uint64_t step_count() const noexcept { return steps_; }

  std::span<const T> first_moment() const noexcept { return m_; }
  std::span<const T> second_moment() const noexcept { return v_; }
  // Restores a saved state; sizes must match.
  void restore(uint64_t steps, std::vector<T> m, std::vector<T> v);

 private:
  AdamConfig cfg_;
  std::vector<T> m_;
  std::vector<T> v_;
  uint64_t steps_ = 0;
};

}  // namespace gnosis::ad
