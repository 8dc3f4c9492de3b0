// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary-classification metrics over (p_hat, y) pairs, y = 1 meaning the
// generation was correct. Ties are handled without regard to input order:
// half credit in AUROC, grouped thresholds in average precision.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gnosis::eval {

enum class Positive { kCorrect, kError };
enum class BinScheme { kEqualWidth, kEqualMass };

inline constexpr std::size_t kDefaultBins = 10;

// Mann-Whitney probability that a correct example outscores an incorrect one.
double auroc(std::span<const double> p, std::span<const uint8_t> y);
// Average precision. For kError, examples are ranked by ascending p and the
// labels are complemented.
double aupr(std::span<const double> p, std::span<const uint8_t> y, Positive positive);
double brier(std::span<const double> p, std::span<const uint8_t> y);
// 1 - BS / BS_ref with BS_ref from the evaluation-set prevalence.
double brier_skill(std::span<const double> p, std::span<const uint8_t> y);

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;  // empty bins have neither
  std::optional<double> accuracy;

  bool operator==(const ReliabilityBin&) const = default;
};

// Equal-width bins use index min(floor(p * bins), bins - 1), so the last bin
// is closed on the right. Equal-mass bins split the p-sorted examples into
// contiguous groups of floor/ceil(n / bins).
std::vector<ReliabilityBin> reliability(std::span<const double> p, std::span<const uint8_t> y,
                                        std::size_t bins = kDefaultBins,
                                        BinScheme scheme = BinScheme::kEqualWidth);
double ece(std::span<const double> p, std::span<const uint8_t> y, std::size_t bins = kDefaultBins,
           BinScheme scheme = BinScheme::kEqualWidth);

struct EvalReport {
  std::size_t n = 0;
  double prevalence = 0.0;
  // Undefined when only one class is present.
  std::optional<double> auroc;
  std::optional<double> aupr_c;
  std::optional<double> aupr_e;
  std::optional<double> bss;
  double brier = 0.0;
  double ece = 0.0;
  std::size_t ece_bins = kDefaultBins;
  BinScheme ece_scheme = BinScheme::kEqualWidth;
  std::vector<ReliabilityBin> reliability;
  std::optional<double> prefix_fraction;

  nlohmann::json to_json() const;
  bool operator==(const EvalReport&) const = default;
};

EvalReport make_report(std::span<const double> p, std::span<const uint8_t> y, std::size_t bins = kDefaultBins,
                       BinScheme scheme = BinScheme::kEqualWidth);

// Fixed CSV layouts.
inline constexpr const char* kReportCsvHeader = "n,prevalence,auroc,aupr_c,aupr_e,bss,brier,ece";
inline constexpr const char* kSweepCsvHeader = "fraction,auroc,aupr_c,aupr_e,bss,ece";
inline constexpr const char* kReliabilityCsvHeader = "bin_lo,bin_hi,count,mean_confidence,accuracy";

std::string report_csv_row(const EvalReport& r);
std::string sweep_csv_row(const EvalReport& r);
std::string reliability_csv(const EvalReport& r);

}  // namespace gnosis::eval
