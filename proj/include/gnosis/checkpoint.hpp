// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// GNSW parameter checkpoints (little-endian):
//   "GNSW" | u32 version | u32 n | JSON {model, geometry, extra} (n bytes)
//   u32 count | count x (u32 name_len | name | u32 ndim | u32 dims[ndim] | f32 values)
//   u8 has_optimizer | [u32 n | JSON {lr, beta1, beta2, eps, steps, cursor} |
//                       u64 size | f32 m[size] | f32 v[size]]
//   u32 CRC32 of everything before it

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "gnosis/ad/adam.hpp"
#include "gnosis/model.hpp"

namespace gnosis::model {

inline constexpr uint32_t kCheckpointVersion = 1;

struct OptimizerSnapshot {
  ad::AdamConfig adam;
  uint64_t steps = 0;
  std::vector<float> m;
  std::vector<float> v;
  nlohmann::json cursor = nlohmann::json::object();  // training position
};

struct LoadedCheckpoint {
  GnosisModel<float> model;
  std::optional<OptimizerSnapshot> optimizer;
  nlohmann::json extra;
};

std::vector<uint8_t> encode_checkpoint(const GnosisModel<float>& model, const OptimizerSnapshot* optimizer = nullptr,
                                       const nlohmann::json& extra = nlohmann::json::object());
LoadedCheckpoint decode_checkpoint(std::span<const uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const GnosisModel<float>& model,
                     const OptimizerSnapshot* optimizer = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object());
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gnosis::model
