// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gnosis/compression.hpp"
#include "gnosis/errors.hpp"
#include "gnosis/model.hpp"
#include "gnosis/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/small_sets.hpp"

using namespace gnosis;
using gnosis::testing::ScratchDir;
using gnosis::testing::small_synthetic;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

synth::OracleReport oracle_of(const synth::SyntheticConfig& cfg, const std::string& tag) {
  ScratchDir dir(tag);
  synth::generate(cfg, dir.path());
  return synth::oracle_report(cfg, trace::scan_traceset(dir.path()));
}

}  // namespace

TEST_CASE("fixed seed gives byte-identical files") {
  ScratchDir a("syn_a"), b("syn_b");
  const auto cfg = small_synthetic(12, 3);
  synth::generate(cfg, a.path());
  synth::generate(cfg, b.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename().string()));
  }
  CHECK(files == 12 + 12 * 4 + 1);
}

TEST_CASE("generated traces validate and the manifest agrees with the files") {
  ScratchDir dir("syn_manifest");
  const auto cfg = small_synthetic(30, 4);
  const auto summary = synth::generate(cfg, dir.path());
  const auto ts = trace::scan_traceset(dir.path());
  CHECK(ts.rejected.empty());
  CHECK(ts.size() == 30);
  std::size_t correct = 0;
  for (const auto& e : ts.entries) {
    const auto t = trace::read_trace(e.path);
    CHECK_NOTHROW(t.validate());
    CHECK(t.prompt_id() == e.id);
    correct += t.header.label;
    CHECK(e.prefixes.size() == cfg.prefix_fractions.size());
    for (double f : cfg.prefix_fractions) {
      const auto p = trace::read_trace(e.prefixes.at(trace::fraction_key(f)));
      CHECK(p.prefix_fraction() == f);
      CHECK(p.header.seq_len == compress::prefix_length(t.header.seq_len, t.header.prompt_len, f));
      CHECK_NOTHROW(compress::prefix_view(t, f, &p));
    }
  }
  std::ifstream in(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  CHECK(manifest["counts"]["traces"] == 30);
  CHECK(manifest["counts"]["correct"] == correct);
  CHECK(manifest["counts"]["prefix_files"] == 30 * cfg.prefix_fractions.size());
  CHECK(manifest["traces"].size() == 30);
  CHECK(summary.correct == correct);
  CHECK(manifest["config"] == cfg.to_json());
}

TEST_CASE("prefix of a generated trace scores inside (0, 1)") {
  const auto g = synth::generate_trace(small_synthetic(1, 5), 0);
  const model::GnosisModel<float> m(model::ModelConfig::desk(), {32, 4, 4}, 1);
  const auto view = compress::prefix_view(g.full, 0.4, &g.prefixes[1]);
  const double p = m.score(view);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("label prevalence stays within three standard errors") {
  auto cfg = small_synthetic(800, 6);
  cfg.prevalence = 0.3;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cfg.n_traces; ++i) {
    correct += synth::generate_trace(cfg, i).planted.label;
  }
  const double rate = static_cast<double>(correct) / 800.0;
  CHECK(std::abs(rate - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / 800.0));
}

TEST_CASE("default separation is visible to the oracles") {
  auto cfg = small_synthetic(300, 7);
  const auto r = oracle_of(cfg, "syn_sep");
  CHECK(r.n == 300);
  CHECK(r.planted_auroc >= 0.99);
  CHECK(r.feature_auroc[stats::kMapEntropyNorm] >= 0.8);
  for (double a : r.feature_auroc) {
    CHECK(a >= 0.5);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("null signal leaves every statistic near chance") {
  auto cfg = small_synthetic(2000, 8);
  cfg.sigma_incorrect = cfg.sigma_correct;
  cfg.tau_incorrect = cfg.tau_correct;
  cfg.drift = 0.0;
  cfg.prefix_fractions.clear();
  const auto r = oracle_of(cfg, "syn_null");
  for (std::size_t i = 0; i < stats::kNumStats; ++i) {
    INFO(stats::kStatNames[i] << " " << r.feature_auroc[i]);
    CHECK(r.feature_auroc[i] >= 0.45);
    CHECK(r.feature_auroc[i] <= 0.55);
  }
}

TEST_CASE("wider temperature separation raises the entropy feature's AUROC") {
  std::vector<double> aurocs;
  for (double ratio : {1.1, 1.3, 1.8}) {
    auto cfg = small_synthetic(400, 9);
    cfg.tau_incorrect = cfg.tau_correct * ratio;
    cfg.prefix_fractions.clear();
    aurocs.push_back(oracle_of(cfg, "syn_mono").feature_auroc[stats::kMapEntropyNorm]);
  }
  INFO(aurocs[0] << " " << aurocs[1] << " " << aurocs[2]);
  CHECK(aurocs[0] < aurocs[1]);
  CHECK(aurocs[1] < aurocs[2]);
}

TEST_CASE("family siblings share labels and planted parameters") {
  ScratchDir dir("syn_family");
  const auto cfg = small_synthetic(10, 10);
  const auto res = synth::generate_family(cfg, {32, 48}, dir.path());
  REQUIRE(res.size() == 2);
  const auto a = trace::scan_traceset(dir / "d32");
  const auto b = trace::scan_traceset(dir / "d48");
  CHECK(a.geometry.hidden_dim == 32);
  CHECK(b.geometry.hidden_dim == 48);
  CHECK(a.geometry.num_heads == b.geometry.num_heads);
  CHECK(a.geometry.grid == b.geometry.grid);
  bool some_length_differs = false;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto ta = trace::read_trace(a.entries[i].path);
    const auto tb = trace::read_trace(b.entries[i].path);
    CHECK(ta.header.label == tb.header.label);
    const auto pa = synth::PlantedParams::from_json(ta.meta["planted"]);
    const auto pb = synth::PlantedParams::from_json(tb.meta["planted"]);
    CHECK(pa.sigma == pb.sigma);
    CHECK(pa.tau == pb.tau);
    some_length_differs = some_length_differs || ta.header.seq_len != tb.header.seq_len;
  }
  CHECK(some_length_differs);
  CHECK_THROWS_AS(synth::generate_family(cfg, {}, dir.path()), DomainError);
}

TEST_CASE("configuration checks") {
  synth::SyntheticConfig cfg;
  CHECK_THROWS_AS(cfg.merge_json({{"n_trace", 3}}), ConfigError);
  CHECK(synth::SyntheticConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  auto bad = cfg;
  bad.sigma_correct = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.prevalence = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.seq_len_min = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("oracle needs planted parameters and both classes") {
  ScratchDir dir("syn_oracle_err");
  std::mt19937_64 rng(1);
  trace::write_trace(gnosis::testing::random_trace(rng, 20, 2, 32, 4, 4, 32, 1, "x"), dir / "x.gtrc");
  trace::write_trace(gnosis::testing::random_trace(rng, 20, 2, 32, 4, 4, 32, 0, "y"), dir / "y.gtrc");
  CHECK_THROWS_AS(synth::oracle_report(synth::SyntheticConfig{}, trace::scan_traceset(dir.path())), ValidationError);
}
