// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small synthetic configurations that generate in well under a second.

#pragma once

#include "gnosis/synthetic.hpp"

namespace gnosis::testing {

inline synth::SyntheticConfig small_synthetic(std::size_t n, uint64_t seed) {
  synth::SyntheticConfig c;
  c.n_traces = n;
  c.seed = seed;
  c.seq_len_min = 40;
  c.seq_len_max = 80;
  c.prompt_len_min = 4;
  c.prompt_len_max = 8;
  return c;
}

}  // namespace gnosis::testing
