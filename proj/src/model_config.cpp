// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/model_config.hpp"

#include <array>
#include <utility>

#include "gnosis/errors.hpp"

namespace gnosis::model {

namespace {

constexpr std::array<std::pair<Ablation, std::string_view>, 5> kAblations = {{
    {Ablation::kFull, "full"},
    {Ablation::kHiddenOnly, "hidden_only"},
    {Ablation::kAttnOnly, "attn_only"},
    {Ablation::kAttnStatsOnly, "attn_stats_only"},
    {Ablation::kAttnCnnOnly, "attn_cnn_only"},
}};

void positive(std::size_t v, const char* field) {
  if (v == 0) throw ConfigError(std::string("model.") + field + " must be positive");
}

template <class V>
void take(const nlohmann::json& j, const char* key, V& out) {
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model.") + key + ": " + e.what());
  }
}

}  // namespace

std::string_view ablation_name(Ablation a) noexcept {
  for (const auto& [k, v] : kAblations) {
    if (k == a) return v;
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  for (const auto& [k, v] : kAblations) {
    if (v == name) return k;
  }
  throw ConfigError("unknown ablation '" + std::string(name) +
                    "' (expected full, hidden_only, attn_only, attn_stats_only or attn_cnn_only)");
}

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.d_tok = 64;
  c.k_hid = 32;
  c.n_sab = 2;
  c.k = 32;
  c.cnn_channels = {4, 8, 8, 16};
  c.d_hid = 64;
  c.d_attn_model = 32;
  c.fusion_hidden = 32;
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

void ModelConfig::validate() const {
  positive(d_tok, "d_tok");
  positive(k_hid, "k_hid");
  positive(sab_heads, "sab_heads");
  positive(pma_seeds_hidden, "pma_seeds_hidden");
  positive(d_hid, "d_hid");
  positive(se_reduction, "se_reduction");
  positive(d_attn_model, "d_attn_model");
  positive(attn_heads, "attn_heads");
  positive(pma_seeds_attn, "pma_seeds_attn");
  positive(d_att, "d_att");
  positive(k, "k");
  positive(layer_stride, "layer_stride");
  positive(fusion_hidden, "fusion_hidden");
  positive(ff_mult, "ff_mult");
  if (d_tok % sab_heads != 0) throw ConfigError("model.d_tok must be divisible by model.sab_heads");
  if (d_attn_model % attn_heads != 0) throw ConfigError("model.d_attn_model must be divisible by model.attn_heads");
  if (d_tok / se_reduction == 0) throw ConfigError("model.se_reduction larger than model.d_tok");
  if (dilations.empty()) throw ConfigError("model.dilations must not be empty");
  for (auto d : dilations) positive(d, "dilations");
  if (conv_kernel % 2 == 0) throw ConfigError("model.conv_kernel must be odd");
  if (cnn_channels.empty()) throw ConfigError("model.cnn_channels must not be empty");
  for (auto c : cnn_channels) positive(c, "cnn_channels");
  if (k < 2) throw ConfigError("model.k must be at least 2");
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"d_tok", d_tok},
      {"k_hid", k_hid},
      {"n_sab", n_sab},
      {"sab_heads", sab_heads},
      {"pma_seeds_hidden", pma_seeds_hidden},
      {"d_hid", d_hid},
      {"se_reduction", se_reduction},
      {"dilations", dilations},
      {"conv_kernel", conv_kernel},
      {"cnn_channels", cnn_channels},
      {"d_stat", d_stat},
      {"d_grid", d_grid()},
      {"d_attn_model", d_attn_model},
      {"attn_heads", attn_heads},
      {"axial_blocks", axial_blocks},
      {"pma_seeds_attn", pma_seeds_attn},
      {"d_att", d_att},
      {"k", k},
      {"layer_stride", layer_stride},
      {"fusion_hidden", fusion_hidden},
      {"ff_mult", ff_mult},
      {"ablation", std::string(ablation_name(ablation))},
      {"mask_prompt", mask_prompt},
      {"hidden_mode", hidden_mode == compress::HiddenMode::kDownsampleOnly ? "downsample" : "resample"},
  };
}

void ModelConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (key == "d_tok") take(j, "d_tok", d_tok);
    else if (key == "k_hid") take(j, "k_hid", k_hid);
    else if (key == "n_sab") take(j, "n_sab", n_sab);
    else if (key == "sab_heads") take(j, "sab_heads", sab_heads);
    else if (key == "pma_seeds_hidden") take(j, "pma_seeds_hidden", pma_seeds_hidden);
    else if (key == "d_hid") take(j, "d_hid", d_hid);
    else if (key == "se_reduction") take(j, "se_reduction", se_reduction);
    else if (key == "dilations") take(j, "dilations", dilations);
    else if (key == "conv_kernel") take(j, "conv_kernel", conv_kernel);
    else if (key == "cnn_channels") take(j, "cnn_channels", cnn_channels);
    else if (key == "d_attn_model") take(j, "d_attn_model", d_attn_model);
    else if (key == "attn_heads") take(j, "attn_heads", attn_heads);
    else if (key == "axial_blocks") take(j, "axial_blocks", axial_blocks);
    else if (key == "pma_seeds_attn") take(j, "pma_seeds_attn", pma_seeds_attn);
    else if (key == "d_att") take(j, "d_att", d_att);
    else if (key == "k") take(j, "k", k);
    else if (key == "layer_stride") take(j, "layer_stride", layer_stride);
    else if (key == "fusion_hidden") take(j, "fusion_hidden", fusion_hidden);
    else if (key == "ff_mult") take(j, "ff_mult", ff_mult);
    else if (key == "mask_prompt") take(j, "mask_prompt", mask_prompt);
    else if (key == "ablation") {
      std::string s;
      take(j, "ablation", s);
      ablation = parse_ablation(s);
    } else if (key == "hidden_mode") {
      std::string s;
      take(j, "hidden_mode", s);
      if (s == "downsample") hidden_mode = compress::HiddenMode::kDownsampleOnly;
      else if (s == "resample") hidden_mode = compress::HiddenMode::kResampleAlways;
      else throw ConfigError("model.hidden_mode must be 'downsample' or 'resample'");
    } else if (key == "d_stat") {
      if (val != d_stat) throw ConfigError("model.d_stat is fixed at 16");
    } else if (key == "d_grid") {
      // derived; checked after the merge
    } else {
      throw ConfigError("unknown key 'model." + key + "'");
    }
  }
  if (j.contains("d_grid") && j.at("d_grid") != d_grid()) {
    throw ConfigError("model.d_grid must equal the last cnn channel count + 16 (" + std::to_string(d_grid()) + ")");
  }
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.merge_json(j);
  c.validate();
  return c;
}

}  // namespace gnosis::model
