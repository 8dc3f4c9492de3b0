// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Supervised training of the probe with mean BCE and Adam.
//
// Each mini-batch computes one gradient per example in parallel and sums
// them in example order, so the result does not depend on the thread count.
// Epoch order is a permutation drawn from (seed, epoch), which lets a run
// resumed from a checkpoint replay exactly what an uninterrupted run does.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnosis/model.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::train {

struct TrainConfig {
  std::size_t epochs = 2;
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  uint64_t seed = 7;
  double eval_fraction = 0.1;
  model::Ablation ablation = model::Ablation::kFull;
  std::size_t checkpoint_every = 0;  // steps; 0 writes only at epoch ends
  // Weights each class by n / (2 n_class) on the training split.
  bool prevalence_weighting = false;

  void validate() const;
  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Split {
  std::vector<trace::TraceEntry> train;
  std::vector<trace::TraceEntry> val;
  std::size_t excluded_unlabeled = 0;

  std::size_t train_correct() const;
  std::size_t val_correct() const;
};

// Labeled traces only. Both splits are non-empty and the training split must
// contain both classes, else DegenerateError.
Split build_dataset(const trace::TraceSet& ts, uint64_t seed, double eval_fraction);

struct Example {
  std::string id;
  model::PreparedTrace x;
  uint8_t label = 0;
};

std::vector<Example> prepare_examples(const model::GnosisModel<float>& model,
                                      std::span<const trace::TraceEntry> entries);

struct StepRecord {
  std::size_t step = 0;  // 1-based optimizer step
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_bce = 0.0;
  double val_bce = 0.0;
  std::optional<double> val_auroc;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  double wall_seconds = 0.0;
};

// Trains in place and writes into out_dir: train_log.jsonl (one line per
// step and per epoch), train_summary.json, final.gnsw (with optimizer state),
// best.gnsw (best validation AUROC, BCE when AUROC is undefined) and
// step_NNNNNN.gnsw every checkpoint_every steps.
TrainLog train(model::GnosisModel<float>& model, const Split& split, const TrainConfig& cfg,
               const std::filesystem::path& out_dir);

struct Resumed {
  model::GnosisModel<float> model;
  TrainLog log;
};

// Continues from a checkpoint written by train(). batch_size, seed,
// learning_rate, eval_fraction, ablation and prevalence_weighting must match
// the original run (ConfigError naming the field); epochs may grow.
Resumed resume(const std::filesystem::path& checkpoint, const Split& split, const TrainConfig& cfg,
               const std::filesystem::path& out_dir);

}  // namespace gnosis::train
