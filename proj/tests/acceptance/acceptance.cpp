// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run. Prints one PASS or FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gnosis/ad/grad_check.hpp"
#include "gnosis/attn_stats.hpp"
#include "gnosis/compression.hpp"
#include "gnosis/evaluation.hpp"
#include "gnosis/metrics.hpp"
#include "gnosis/model.hpp"
#include "gnosis/synthetic.hpp"
#include "gnosis/training.hpp"
#include "oracles/metrics_oracle.hpp"
#include "oracles/pooling_oracle.hpp"
#include "oracles/stats_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/primitive_cases.hpp"

using namespace gnosis;
using Clock = std::chrono::steady_clock;

namespace {

// gradients
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr int kPrimitivePoints = 3;
constexpr std::size_t kModelCoordsPerTensor = 3;
// oracle equivalence
constexpr int kPoolingCases = 200;
constexpr double kPoolingTol = 1e-12;
constexpr int kStatsCases = 100;
constexpr double kStatsTol = 1e-10;
constexpr double kInvarianceTol = 1e-12;
constexpr int kMetricSets = 100;
constexpr std::size_t kMetricMaxN = 50;
constexpr double kMetricTol = 1e-12;
// end to end
constexpr std::size_t kTrainTraces = 2000;
constexpr std::size_t kTestTraces = 500;
constexpr std::size_t kEpochs = 2;
constexpr double kLearningRate = 1e-4;
constexpr double kMinAuroc = 0.90;
constexpr double kMaxEce = 0.10;
constexpr double kOracleSlack = 0.02;
constexpr double kMaxWallSeconds = 300.0;
// ablation
constexpr double kAblationSlack = 0.01;
// length invariance
constexpr double kMaxLengthTimeRatio = 2.0;
constexpr int kTimingRepeats = 21;
// early prediction
constexpr double kEarlyFraction = 0.4;
constexpr double kEarlyRatio = 0.8;
// sibling transfer
constexpr double kSiblingGap = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.pass) ++g_failures;
  std::printf("%s  %-20s %s  [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_abs_diff(const MatrixD& a, const MatrixD& b) {
  if (a.rows != b.rows || a.cols != b.cols) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

MatrixD transpose(const MatrixD& m) {
  MatrixD t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  }
  return t;
}

model::GnosisModel<float> train_head(const trace::TraceSet& ts, train::TrainConfig cfg, model::Ablation ablation,
                                     const std::filesystem::path& out) {
  auto mc = model::ModelConfig::desk();
  mc.ablation = ablation;
  cfg.ablation = ablation;
  model::GnosisModel<float> m(mc, model::ModelGeometry::of(ts.geometry), cfg.seed);
  const auto split = train::build_dataset(ts, cfg.seed, cfg.eval_fraction);
  train::train(m, split, cfg, out);
  return m;
}

Outcome gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const auto& c : gnosis::testing::primitive_cases(102)) {
    for (int point = 0; point < kPrimitivePoints; ++point) {
      const auto x = gnosis::testing::uniform_vector(rng, ad::numel(c.shape), c.lo, c.hi);
      const auto r = ad::grad_check(c.fn, c.shape, x, kGradTol);
      ++cases;
      if (r.max_rel_error > worst || !r.passed) {
        worst = std::max(worst, r.max_rel_error);
        worst_name = c.name + " " + r.worst;
      }
    }
  }
  model::GnosisModel<double> m(model::ModelConfig::desk(), {32, 4, 4}, 103);
  std::mt19937_64 trng(104);
  const auto t = gnosis::testing::random_trace(trng, 96, 8, 32, 4, 4, 32, 1);
  const auto full = model::grad_check_model(m, m.prepare(t), 1, kGradTol, kModelCoordsPerTensor, 105);
  const double secs = seconds_since(start);
  const bool ok = worst < kGradTol && full.passed && full.max_rel_error < kGradTol && secs < kGradSeconds;
  return {ok, fmt("%zu primitive checks max rel %.2e (%s); desk model %zu coords max rel %.2e (%s); %.1f s < %.0f s",
                  cases, worst, worst_name.c_str(), full.checked, full.max_rel_error, full.worst.c_str(), secs,
                  kGradSeconds)};
}

Outcome pooling() {
  std::mt19937_64 rng(201);
  std::uniform_int_distribution<std::size_t> len(1, 400), budget(2, 64), dim(1, 6), side(1, 96), grid(2, 32);
  double worst_h = 0.0, worst_a = 0.0;
  for (int rep = 0; rep < kPoolingCases / 2; ++rep) {
    const std::size_t S = len(rng), K = budget(rng);
    const MatrixD h = gnosis::testing::uniform_matrix(rng, S, dim(rng), -4.0, 4.0);
    worst_h = std::max(worst_h, max_abs_diff(compress::pool_hidden(h, {K}), oracle::pool_hidden(h, K)));
  }
  for (int rep = 0; rep < kPoolingCases / 2; ++rep) {
    const std::size_t S = side(rng), k = grid(rng);
    const bool renorm = rep % 2 == 0;
    const MatrixD a = gnosis::testing::uniform_matrix(rng, S, S, 0.0, 1.0);
    worst_a = std::max(worst_a, max_abs_diff(compress::pool_attention(a, {k, renorm}),
                                             oracle::pool_attention(a, k, renorm)));
  }
  const bool ok = worst_h <= kPoolingTol && worst_a <= kPoolingTol;
  return {ok, fmt("%d (S,K) hidden cases max |diff| %.2e, %d (S,k) attention cases max |diff| %.2e, tol %.0e",
                  kPoolingCases / 2, worst_h, kPoolingCases / 2, worst_a, kPoolingTol)};
}

Outcome statistics() {
  using namespace stats;
  std::mt19937_64 rng(301);
  std::uniform_int_distribution<std::size_t> side(2, 24);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  double worst = 0.0, worst_inv = 0.0;
  std::size_t out_of_range = 0;
  for (int rep = 0; rep < kStatsCases; ++rep) {
    const std::size_t k = side(rng);
    const MatrixD m = gnosis::testing::random_map(rng, k);
    const auto f = stat_features(m);
    const auto ref = oracle::stat_features(m.data, k);
    for (std::size_t i = 0; i < kNumStats; ++i) {
      worst = std::max(worst, std::abs(f[i] - ref[i]));
      if (!(f[i] >= 0.0 && f[i] <= 1.0)) ++out_of_range;
    }
    MatrixD scaled = m;
    const double c = scale(rng);
    for (double& v : scaled.data) v *= c;
    const auto fs = stat_features(scaled);
    for (std::size_t i = 0; i < kNumStats; ++i) worst_inv = std::max(worst_inv, std::abs(fs[i] - f[i]));
    const auto ft = stat_features(transpose(m));
    const std::pair<std::size_t, std::size_t> swapped[] = {{kRowEntropyMean, kColEntropyMean},
                                                           {kRowEntropyStd, kColEntropyStd},
                                                           {kColEntropyMean, kRowEntropyMean},
                                                           {kCenterRow, kCenterCol},
                                                           {kCenterCol, kCenterRow}};
    for (auto [a, b] : swapped) worst_inv = std::max(worst_inv, std::abs(ft[a] - f[b]));
    for (std::size_t i : {kMapEntropyNorm, kDiagRatio, kBandRatioW1, kBandRatioW2, kBandRatioW4, kBandRatioW8,
                          kSpreadRms, kSpectralEntropyNorm}) {
      worst_inv = std::max(worst_inv, std::abs(ft[i] - f[i]));
    }
  }
  const bool ok = worst <= kStatsTol && out_of_range == 0 && worst_inv <= kInvarianceTol;
  return {ok, fmt("%d maps: oracle max |diff| %.2e (tol %.0e), %zu features outside [0,1], "
                  "scale/transpose max |diff| %.2e (tol %.0e)",
                  kStatsCases, worst, kStatsTol, out_of_range, worst_inv, kInvarianceTol)};
}

Outcome metrics() {
  using namespace eval;
  std::mt19937_64 rng(401);
  std::uniform_int_distribution<std::size_t> size(2, kMetricMaxN);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  std::size_t symmetry_breaks = 0;
  for (int rep = 0; rep < kMetricSets; ++rep) {
    const std::size_t n = size(rng);
    const bool grid = coin(rng);
    std::vector<double> p(n), comp(n);
    std::vector<uint8_t> y(n), flip(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = grid ? std::floor(u(rng) * 64.0) / 64.0 : u(rng);
      y[i] = coin(rng) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      comp[i] = 1.0 - p[i];
      flip[i] = 1 - y[i];
    }
    worst = std::max({worst, std::abs(auroc(p, y) - oracle::auroc(p, y)),
                      std::abs(aupr(p, y, Positive::kCorrect) - oracle::aupr_c(p, y)),
                      std::abs(aupr(p, y, Positive::kError) - oracle::aupr_e(p, y)),
                      std::abs(brier_skill(p, y) - oracle::brier_skill(p, y)),
                      std::abs(ece(p, y) - oracle::ece(p, y, kDefaultBins))});
    if (auroc(p, y) + auroc(p, flip) != 1.0) ++symmetry_breaks;
    if (auroc(p, y) + auroc(comp, y) != 1.0) ++symmetry_breaks;
    if (aupr(p, y, Positive::kCorrect) != aupr(comp, flip, Positive::kError)) ++symmetry_breaks;
    if (aupr(p, y, Positive::kError) != aupr(comp, flip, Positive::kCorrect)) ++symmetry_breaks;
  }
  const bool ok = worst <= kMetricTol && symmetry_breaks == 0;
  return {ok, fmt("%d sets (n <= %zu): max |diff| vs oracle %.2e (tol %.0e), %zu inexact antisymmetry/duality checks",
                  kMetricSets, kMetricMaxN, worst, kMetricTol, symmetry_breaks)};
}

Outcome parameters() {
  const auto pc = model::param_count(model::ModelConfig::paper(), {2048, 6, 16});
  auto within = [](std::size_t v, double anchor) {
    return std::abs(static_cast<double>(v) - anchor) <= model::kParamBand * anchor;
  };
  const bool ok = within(pc.hidden, model::kHiddenParamAnchor) && within(pc.attn, model::kAttnParamAnchor) &&
                  within(pc.total, model::kTotalParamAnchor);
  return {ok, fmt("hidden %.3fM (2.6M), attention %.3fM (1.4M), total %.3fM (5M), band +-%.0f%%", pc.hidden / 1e6,
                  pc.attn / 1e6, pc.total / 1e6, model::kParamBand * 100)};
}

Outcome length_invariance() {
  const model::GnosisModel<float> m(model::ModelConfig::desk(), {32, 4, 4}, 501);
  std::vector<std::size_t> ops;
  std::vector<ad::Shape> shapes;
  std::vector<double> median_ms;
  for (uint32_t S : {128u, 1024u, 8192u}) {
    std::mt19937_64 rng(S);
    const auto bytes = trace::encode_trace(gnosis::testing::random_trace(rng, S, 8, 32, 4, 4, 32, 1));
    {
      const auto x = m.prepare(trace::decode_trace(bytes));
      ad::Tape<float> tape;
      const auto r = m.forward(tape, x);
      ops.push_back(tape.op_count());
      shapes.push_back(r.z_hid.shape());
      shapes.push_back(r.z_attn.shape());
    }
    std::vector<double> ms;
    for (int rep = 0; rep < kTimingRepeats; ++rep) {
      const auto t0 = Clock::now();
      volatile double p = m.score(m.prepare(trace::decode_trace(bytes)));
      (void)p;
      ms.push_back(seconds_since(t0) * 1e3);
    }
    std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
    median_ms.push_back(ms[ms.size() / 2]);
  }
  const bool same_ops = ops[0] == ops[1] && ops[1] == ops[2];
  const bool same_shapes = shapes[0] == shapes[2] && shapes[2] == shapes[4] && shapes[1] == shapes[3] &&
                           shapes[3] == shapes[5];
  const double ratio = median_ms[2] / median_ms[0];
  const bool ok = same_ops && same_shapes && ratio <= kMaxLengthTimeRatio;
  return {ok, fmt("ops %zu/%zu/%zu, descriptor shapes %s; decode+score median %.2f ms (S=128) vs %.2f ms (S=8192), "
                  "ratio %.2f <= %.1f",
                  ops[0], ops[1], ops[2], same_shapes ? "identical" : "differ", median_ms[0], median_ms[2], ratio,
                  kMaxLengthTimeRatio)};
}

struct EndToEnd {
  gnosis::testing::ScratchDir dir{"acceptance_e2e"};
  std::optional<model::GnosisModel<float>> model;
  std::optional<trace::TraceSet> test;
  std::optional<eval::EvalReport> report;
};

Outcome end_to_end(EndToEnd& run) {
  const auto start = Clock::now();
  synth::SyntheticConfig train_cfg;
  train_cfg.n_traces = kTrainTraces;
  train_cfg.seed = 1;
  auto test_cfg = train_cfg;
  test_cfg.n_traces = kTestTraces;
  test_cfg.seed = 2;
  synth::generate(train_cfg, run.dir / "train");
  synth::generate(test_cfg, run.dir / "test");
  const auto train_ts = trace::scan_traceset(run.dir / "train");
  run.test = trace::scan_traceset(run.dir / "test");

  train::TrainConfig tc;
  tc.epochs = kEpochs;
  tc.learning_rate = kLearningRate;
  run.model = train_head(train_ts, tc, model::Ablation::kFull, run.dir / "run");
  run.report = eval::evaluate(*run.model, *run.test);
  const double wall = seconds_since(start);
  const double planted = synth::oracle_report(test_cfg, *run.test).planted_auroc;

  const auto& r = *run.report;
  const double a = r.auroc.value_or(0.0), bss = r.bss.value_or(-1.0);
  const bool ok = a >= kMinAuroc && r.ece <= kMaxEce && bss > 0.0 && a <= planted + kOracleSlack &&
                  wall < kMaxWallSeconds;
  return {ok, fmt("%zu train / %zu test, %zu epochs, lr %.0e: AUROC %.4f >= %.2f, ECE %.4f <= %.2f, BSS %.4f > 0, "
                  "planted oracle %.4f (+%.2f), wall %.1f s < %.0f s",
                  kTrainTraces, kTestTraces, kEpochs, kLearningRate, a, kMinAuroc, r.ece, kMaxEce, bss, planted,
                  kOracleSlack, wall, kMaxWallSeconds)};
}

Outcome early_prediction(EndToEnd& run) {
  if (!run.model) return {false, "end-to-end model unavailable"};
  const double fractions[] = {kEarlyFraction, 1.0};
  const auto reports = eval::evaluate_early(*run.model, *run.test, fractions);
  const double early = reports[0].auroc.value_or(0.0), full = reports[1].auroc.value_or(0.0);
  auto plain = *run.report;
  plain.prefix_fraction = 1.0;
  const bool bitwise = reports[1] == plain;
  const bool ok = early >= kEarlyRatio * full && bitwise;
  return {ok, fmt("AUROC %.4f at fraction %.1f vs %.4f at 1.0 (need >= %.1fx = %.4f); 1.0 row %s plain evaluation",
                  early, kEarlyFraction, full, kEarlyRatio, kEarlyRatio * full,
                  bitwise ? "bitwise equals" : "differs from")};
}

Outcome ablation() {
  gnosis::testing::ScratchDir dir("acceptance_ablation");
  synth::SyntheticConfig sc;
  sc.n_traces = 1200;
  sc.seed = 11;
  sc.sigma_incorrect = 0.75;
  sc.tau_incorrect = 0.03;
  sc.jitter = 0.4;
  auto test_cfg = sc;
  test_cfg.n_traces = 400;
  test_cfg.seed = 12;
  synth::generate(sc, dir / "train");
  synth::generate(test_cfg, dir / "test");
  const auto train_ts = trace::scan_traceset(dir / "train");
  const auto test_ts = trace::scan_traceset(dir / "test");
  train::TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 1e-3;
  auto score = [&](model::Ablation a, const char* tag) {
    const auto m = train_head(train_ts, tc, a, dir / tag);
    return eval::evaluate(m, test_ts).auroc.value_or(0.0);
  };
  const double full = score(model::Ablation::kFull, "full");
  const double hid = score(model::Ablation::kHiddenOnly, "hidden_only");
  const double att = score(model::Ablation::kAttnOnly, "attn_only");
  const bool ok = full >= std::max(hid, att) - kAblationSlack;
  return {ok, fmt("AUROC full %.4f, hidden_only %.4f, attn_only %.4f (need full >= %.4f)", full, hid, att,
                  std::max(hid, att) - kAblationSlack)};
}

Outcome sibling_transfer() {
  gnosis::testing::ScratchDir dir("acceptance_sibling");
  const std::vector<std::size_t> widths = {32, 48};
  synth::SyntheticConfig sc;
  sc.n_traces = 1000;
  sc.seed = 21;
  auto test_cfg = sc;
  test_cfg.n_traces = 400;
  test_cfg.seed = 22;
  synth::generate_family(sc, widths, dir / "train");
  synth::generate_family(test_cfg, widths, dir / "test");
  train::TrainConfig tc;
  tc.epochs = kEpochs;
  tc.learning_rate = kLearningRate;
  const auto head_a = train_head(trace::scan_traceset(dir / "train" / "d32"), tc, model::Ablation::kFull, dir / "a");
  const auto head_b = train_head(trace::scan_traceset(dir / "train" / "d48"), tc, model::Ablation::kFull, dir / "b");
  const auto b_test = trace::scan_traceset(dir / "test" / "d48");
  const double self = eval::evaluate(head_b, b_test).auroc.value_or(0.0);
  const auto adapter = eval::HiddenAdapter::orthonormal(48, 32, 9);
  const double transfer = eval::evaluate_sibling(head_a, b_test, &adapter).auroc.value_or(0.0);
  const bool ok = std::abs(transfer - self) <= kSiblingGap;
  return {ok, fmt("head A (D=32) on B (D=48) AUROC %.4f vs B self-judgment %.4f, gap %.4f <= %.1f", transfer, self,
                  std::abs(transfer - self), kSiblingGap)};
}

}  // namespace

int main() {
  criterion("gradients", gradients);
  criterion("pooling-oracle", pooling);
  criterion("stats-oracle", statistics);
  criterion("metrics-oracle", metrics);
  criterion("param-count", parameters);
  criterion("length-invariance", length_invariance);
  EndToEnd run;
  criterion("end-to-end", [&] { return end_to_end(run); });
  criterion("early-prediction", [&] { return early_prediction(run); });
  criterion("ablation-order", ablation);
  criterion("sibling-transfer", sibling_transfer);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
