// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic trace generator with planted, known separability.
//
// Per trace i (all randomness from seed_seq{seed, i, stream}):
//   y ~ Bernoulli(prevalence)
//   sigma = sigma_y * exp(jitter * N(0,1)), tau = tau_y * exp(jitter * N(0,1))
//   hidden: h_t = mu + e_t + drift * y * t/(S-1) * u, e an AR(1) process with
//     coefficient ar_coef and stationary std sigma, mu ~ N(0, 0.5^2) per
//     coordinate, u a random unit vector
//   attention map (l, h): causal band kernel exp(-(i-j) / (tau_lh * S)) row
//     normalized, mixed with uniform causal attention at weight attn_noise,
//     tau_lh = tau * exp(head_jitter * N(0,1)); pooled to the grid
// Prefix payloads are pooled from the top-left S' x S' block of the same raw
// maps (causal rows do not change under truncation).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnosis/attn_stats.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::synth {

struct SyntheticConfig {
  std::size_t n_traces = 2000;
  uint64_t seed = 1;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t grid = 32;
  std::size_t seq_len_min = 64;
  std::size_t seq_len_max = 256;
  std::size_t prompt_len_min = 8;
  std::size_t prompt_len_max = 24;
  double prevalence = 0.5;
  double sigma_correct = 0.5;
  double sigma_incorrect = 1.0;
  double tau_correct = 0.02;
  double tau_incorrect = 0.06;
  double drift = 1.0;
  double ar_coef = 0.95;
  double jitter = 0.25;
  double head_jitter = 0.3;
  double attn_noise = 0.1;
  std::vector<double> prefix_fractions = {0.2, 0.4, 0.6, 0.8};
  // Sibling m of a family draws sequence lengths scaled by length_scale^m.
  double length_scale = 1.5;
  std::string backbone_tag = "synthetic";

  void validate() const;
  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& j);  // unknown keys raise ConfigError
  static SyntheticConfig from_json(const nlohmann::json& j);
};

// What was planted in one trace; stored in its meta under "planted".
struct PlantedParams {
  uint8_t label = 0;
  double sigma = 0.0;
  double tau = 0.0;
  double drift = 0.0;  // drift * y
  std::size_t seq_len = 0;
  std::size_t prompt_len = 0;

  nlohmann::json to_json() const;
  static PlantedParams from_json(const nlohmann::json& j);
};

std::string trace_id(std::size_t index);

// Trace i (and its prefix payloads, in prefix_fractions order) of sibling
// `member`. Deterministic in (config, index, member).
struct GeneratedTrace {
  trace::GenerationTrace full;
  std::vector<trace::GenerationTrace> prefixes;
  PlantedParams planted;
};
GeneratedTrace generate_trace(const SyntheticConfig& cfg, std::size_t index, std::size_t member = 0);

struct GenerationSummary {
  std::filesystem::path directory;
  std::size_t traces = 0;
  std::size_t correct = 0;
  std::size_t prefix_files = 0;
};

// Writes <id>.gtrc, <id>.pNNNN.gtrc and manifest.json into `out`.
GenerationSummary generate(const SyntheticConfig& cfg, const std::filesystem::path& out, std::size_t member = 0);

// Siblings differ in hidden width and sequence-length range only; labels and
// attention parameters are shared. Member m goes to out/d<hidden_dim>.
std::vector<GenerationSummary> generate_family(const SyntheticConfig& cfg, const std::vector<std::size_t>& hidden_dims,
                                               const std::filesystem::path& out);

struct OracleReport {
  std::size_t n = 0;
  // Bayes detector on the planted (sigma, tau, drift): exact likelihood ratio
  // under the generator's class-conditional laws.
  double planted_auroc = 0.5;
  // Moment estimate of sigma from hidden increments, lower = correct.
  double sigma_estimate_auroc = 0.5;
  // Per statistic, mean over maps, direction-free: max(A, 1 - A).
  std::array<double, stats::kNumStats> feature_auroc{};
  std::array<bool, stats::kNumStats> feature_higher_is_correct{};

  nlohmann::json to_json() const;
};

// Single-class sets raise DegenerateError.
OracleReport oracle_report(const SyntheticConfig& cfg, const trace::TraceSet& ts);

// The likelihood ratio used by planted_auroc.
double planted_llr(const SyntheticConfig& cfg, const PlantedParams& p);

}  // namespace gnosis::synth
