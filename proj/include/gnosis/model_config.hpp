// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gnosis/attn_stats.hpp"
#include "gnosis/compression.hpp"

namespace gnosis::model {

// Which parts of the probe are live. Dropped streams feed zeros into the
// fusion head and their parameters are frozen.
enum class Ablation {
  kFull,
  kHiddenOnly,
  kAttnOnly,
  kAttnStatsOnly,  // attention stream, statistics extractor only
  kAttnCnnOnly,    // attention stream, CNN extractor only
};

std::string_view ablation_name(Ablation a) noexcept;
Ablation parse_ablation(std::string_view name);

struct ModelConfig {
  // hidden circuit
  std::size_t d_tok = 192;
  std::size_t k_hid = 192;
  std::size_t n_sab = 3;
  std::size_t sab_heads = 4;
  std::size_t pma_seeds_hidden = 4;
  std::size_t d_hid = 384;
  std::size_t se_reduction = 4;
  std::vector<std::size_t> dilations = {1, 2, 4};
  std::size_t conv_kernel = 3;
  // attention circuit
  std::vector<std::size_t> cnn_channels = {8, 16, 32, 48};
  std::size_t d_attn_model = 128;
  std::size_t attn_heads = 4;
  std::size_t axial_blocks = 2;
  std::size_t pma_seeds_attn = 2;
  std::size_t d_att = 256;
  std::size_t k = 256;
  std::size_t layer_stride = 5;
  // head
  std::size_t fusion_hidden = 256;
  std::size_t ff_mult = 4;

  Ablation ablation = Ablation::kFull;
  bool mask_prompt = false;
  compress::HiddenMode hidden_mode = compress::HiddenMode::kDownsampleOnly;

  static constexpr std::size_t d_stat = stats::kNumStats;
  std::size_t d_grid() const { return cnn_channels.empty() ? d_stat : cnn_channels.back() + d_stat; }

  static ModelConfig paper();
  static ModelConfig desk();
  static ModelConfig preset(std::string_view name);

  // Throws ConfigError naming the first offending field.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their current value; unknown keys raise ConfigError.
  void merge_json(const nlohmann::json& j);
  static ModelConfig from_json(const nlohmann::json& j);
};

}  // namespace gnosis::model
