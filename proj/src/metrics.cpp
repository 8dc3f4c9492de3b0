// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "gnosis/errors.hpp"

namespace gnosis::eval {

namespace {

void check_inputs(std::span<const double> p, std::span<const uint8_t> y) {
  if (p.size() != y.size()) {
    throw ShapeError(std::to_string(p.size()) + " scores vs " + std::to_string(y.size()) + " labels");
  }
  if (p.empty()) throw DomainError("no examples");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0 || p[i] > 1.0) {
      throw DomainError("score " + std::to_string(i) + " is outside [0, 1]");
    }
    if (y[i] > 1) throw DomainError("label " + std::to_string(i) + " is not 0 or 1");
  }
}

std::size_t positives(std::span<const uint8_t> y) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), uint8_t{1}));
}

// Indices sorted by key descending.
std::vector<std::size_t> order_desc(std::span<const double> key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return idx;
}

// Shortest representation that round-trips.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

nlohmann::json jopt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

double auroc(std::span<const double> p, std::span<const uint8_t> y) {
  check_inputs(p, y);
  const std::size_t n1 = positives(y), n0 = y.size() - n1;
  if (n1 == 0 || n0 == 0) throw UndefinedMetricError("AUROC needs both classes");
  // Midranks (1-based) over ascending scores.
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && p[idx[j]] == p[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (y[idx[t]] == 1) rank_sum += mid;
    }
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

double aupr(std::span<const double> p, std::span<const uint8_t> y, Positive positive) {
  check_inputs(p, y);
  const bool err = positive == Positive::kError;
  std::vector<double> key(p.size());
  std::vector<uint8_t> lab(y.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    key[i] = err ? -p[i] : p[i];
    lab[i] = err ? static_cast<uint8_t>(1 - y[i]) : y[i];
  }
  const std::size_t total = positives(lab);
  if (total == 0) {
    throw UndefinedMetricError(std::string("AUPR-") + (err ? "e" : "c") + " needs at least one positive");
  }
  const auto idx = order_desc(key);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i, pos = 0;
    while (j < idx.size() && key[idx[j]] == key[idx[i]]) pos += lab[idx[j++]];
    tp += pos;
    seen += j - i;
    if (pos > 0) {
      ap += (static_cast<double>(pos) / static_cast<double>(total)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    }
    i = j;
  }
  return ap;
}

double brier(std::span<const double> p, std::span<const uint8_t> y) {
  check_inputs(p, y);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return s / static_cast<double>(p.size());
}

double brier_skill(std::span<const double> p, std::span<const uint8_t> y) {
  const double bs = brier(p, y);
  const double prev = static_cast<double>(positives(y)) / static_cast<double>(y.size());
  double ref = 0.0;
  for (auto v : y) ref += (prev - v) * (prev - v);
  ref /= static_cast<double>(y.size());
  if (ref == 0.0) throw UndefinedMetricError("BSS needs both classes");
  return 1.0 - bs / ref;
}

std::vector<ReliabilityBin> reliability(std::span<const double> p, std::span<const uint8_t> y, std::size_t bins,
                                        BinScheme scheme) {
  check_inputs(p, y);
  if (bins == 0) throw DomainError("bin count must be positive");
  const std::size_t n = p.size();
  std::vector<ReliabilityBin> out(bins);
  std::vector<double> conf(bins, 0.0), hits(bins, 0.0);
  if (scheme == BinScheme::kEqualWidth) {
    for (std::size_t b = 0; b < bins; ++b) {
      out[b].lo = static_cast<double>(b) / static_cast<double>(bins);
      out[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = std::min(static_cast<std::size_t>(std::floor(p[i] * static_cast<double>(bins))), bins - 1);
      ++out[b].count;
      conf[b] += p[i];
      hits[b] += y[i];
    }
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t b = 0; b < bins; ++b) {
      const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
      out[b].lo = lo < hi ? p[idx[lo]] : (lo < n ? p[idx[lo]] : 1.0);
      out[b].hi = lo < hi ? p[idx[hi - 1]] : out[b].lo;
      for (std::size_t t = lo; t < hi; ++t) {
        ++out[b].count;
        conf[b] += p[idx[t]];
        hits[b] += y[idx[t]];
      }
    }
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out[b].count == 0) continue;
    out[b].mean_confidence = conf[b] / static_cast<double>(out[b].count);
    out[b].accuracy = hits[b] / static_cast<double>(out[b].count);
  }
  return out;
}

double ece(std::span<const double> p, std::span<const uint8_t> y, std::size_t bins, BinScheme scheme) {
  const auto table = reliability(p, y, bins, scheme);
  double e = 0.0;
  for (const auto& b : table) {
    if (b.count == 0) continue;
    e += (static_cast<double>(b.count) / static_cast<double>(p.size())) * std::abs(*b.accuracy - *b.mean_confidence);
  }
  return e;
}

EvalReport make_report(std::span<const double> p, std::span<const uint8_t> y, std::size_t bins, BinScheme scheme) {
  check_inputs(p, y);
  EvalReport r;
  r.n = p.size();
  r.prevalence = static_cast<double>(positives(y)) / static_cast<double>(r.n);
  const bool both = r.prevalence > 0.0 && r.prevalence < 1.0;
  if (both) {
    r.auroc = auroc(p, y);
    r.aupr_c = aupr(p, y, Positive::kCorrect);
    r.aupr_e = aupr(p, y, Positive::kError);
    r.bss = brier_skill(p, y);
  }
  r.brier = brier(p, y);
  r.ece_bins = bins;
  r.ece_scheme = scheme;
  r.reliability = reliability(p, y, bins, scheme);
  r.ece = ece(p, y, bins, scheme);
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json bins_j = nlohmann::json::array();
  for (const auto& b : reliability) {
    bins_j.push_back({{"lo", b.lo},
                      {"hi", b.hi},
                      {"count", b.count},
                      {"mean_confidence", jopt(b.mean_confidence)},
                      {"accuracy", jopt(b.accuracy)}});
  }
  nlohmann::json j = {
      {"n", n},
      {"prevalence", prevalence},
      {"auroc", jopt(auroc)},
      {"aupr_c", jopt(aupr_c)},
      {"aupr_e", jopt(aupr_e)},
      {"bss", jopt(bss)},
      {"brier", brier},
      {"ece", ece},
      {"ece_bins", ece_bins},
      {"ece_scheme", ece_scheme == BinScheme::kEqualWidth ? "equal_width" : "equal_mass"},
      {"reliability", bins_j},
  };
  if (prefix_fraction) j["prefix_fraction"] = *prefix_fraction;
  return j;
}

std::string report_csv_row(const EvalReport& r) {
  return std::to_string(r.n) + "," + fmt(r.prevalence) + "," + fmt(r.auroc) + "," + fmt(r.aupr_c) + "," +
         fmt(r.aupr_e) + "," + fmt(r.bss) + "," + fmt(r.brier) + "," + fmt(r.ece);
}

std::string sweep_csv_row(const EvalReport& r) {
  return fmt(r.prefix_fraction.value_or(1.0)) + "," + fmt(r.auroc) + "," + fmt(r.aupr_c) + "," + fmt(r.aupr_e) + "," +
         fmt(r.bss) + "," + fmt(r.ece);
}

std::string reliability_csv(const EvalReport& r) {
  std::string s = std::string(kReliabilityCsvHeader) + "\n";
  for (const auto& b : r.reliability) {
    s += fmt(b.lo) + "," + fmt(b.hi) + "," + std::to_string(b.count) + "," + fmt(b.mean_confidence) + "," +
         fmt(b.accuracy) + "\n";
  }
  return s;
}

}  // namespace gnosis::eval
