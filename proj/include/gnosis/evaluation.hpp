// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation regimes: within-set, sibling transfer, early detection on
// prefixes, and external score files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gnosis/metrics.hpp"
#include "gnosis/model.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::eval {

struct ScoredExample {
  std::string id;
  double p = 0.0;
  uint8_t y = trace::kLabelUnlabeled;
};

struct EvalOptions {
  std::size_t bins = kDefaultBins;
  BinScheme scheme = BinScheme::kEqualWidth;
};

// Fixed linear map applied to every hidden state of a sibling backbone whose
// width differs from the trained head. Columns (or rows, when widening) are
// orthonormal, so isotropic noise keeps its per-coordinate scale when the
// map narrows.
struct HiddenAdapter {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<float> weight;  // [in_dim x out_dim]

  static HiddenAdapter orthonormal(std::size_t in_dim, std::size_t out_dim, uint64_t seed);
  trace::GenerationTrace apply(const trace::GenerationTrace& t) const;
};

// Scores every entry in set order. Traces are read and scored in parallel.
std::vector<ScoredExample> score_traces(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                                        const HiddenAdapter* adapter = nullptr);

// Unlabeled examples are dropped; none left raises DegenerateError.
EvalReport report_of(std::span<const ScoredExample> scored, const EvalOptions& opt = {});

EvalReport evaluate(const model::GnosisModel<float>& model, const trace::TraceSet& ts, const EvalOptions& opt = {});

// Head trained on one backbone, traces from another. Layer and head counts
// must match. A hidden width mismatch needs an adapter, else ConfigError.
EvalReport evaluate_sibling(const model::GnosisModel<float>& model, const trace::TraceSet& sibling,
                            const HiddenAdapter* adapter = nullptr, const EvalOptions& opt = {});

// One report per fraction, in the given order. Fractions below 1 need a
// materialized prefix payload for every trace; the ids lacking one are listed
// in the ValidationError.
std::vector<EvalReport> evaluate_early(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                                       std::span<const double> fractions, const EvalOptions& opt = {});

// Score files: header "trace_id,p_hat,label", label optional per row (empty).
inline constexpr const char* kScoreCsvHeader = "trace_id,p_hat,label";
std::vector<ScoredExample> read_score_file(const std::filesystem::path& path);
void write_score_file(const std::filesystem::path& path, std::span<const ScoredExample> scored);

// Joins external scores to the set's labels by trace id. Every labeled trace
// needs a score; a label column that disagrees with the trace is an error.
EvalReport evaluate_scores(std::span<const ScoredExample> scored, const trace::TraceSet& ts,
                           const EvalOptions& opt = {});

// CSV of trace_id,label,z_hid_*,z_attn_* for every trace.
void dump_descriptors(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                      const std::filesystem::path& path);

}  // namespace gnosis::eval
