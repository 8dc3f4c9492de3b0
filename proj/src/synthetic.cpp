// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "gnosis/binary_io.hpp"
#include "gnosis/compression.hpp"
#include "gnosis/errors.hpp"
#include "gnosis/metrics.hpp"
#include "gnosis/parallel.hpp"

namespace gnosis::synth {

namespace fs = std::filesystem;

namespace {

// Separable outcomes in planted_llr dominate any finite likelihood term.
constexpr double kCertain = 1e6;

enum Stream : uint32_t { kParams = 0, kLength = 1, kHidden = 2 };

std::mt19937_64 stream_rng(uint64_t seed, std::size_t index, Stream s, std::size_t member = 0) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(index),
                    static_cast<uint32_t>(index >> 32), static_cast<uint32_t>(s), static_cast<uint32_t>(member)};
  return std::mt19937_64(seq);
}

template <class V>
void take(const nlohmann::json& j, const char* key, V& out) {
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic.") + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("synthetic." + msg);
}

std::size_t scaled(std::size_t v, double scale, std::size_t member) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(v) * std::pow(scale, double(member))));
}

double gaussian_llr(double x, double m1, double m0, double sd) {
  if (m1 == m0) return 0.0;
  if (sd == 0.0) return std::abs(x - m1) <= std::abs(x - m0) ? kCertain : -kCertain;
  return ((x - m0) * (x - m0) - (x - m1) * (x - m1)) / (2.0 * sd * sd);
}

}  // namespace

void SyntheticConfig::validate() const {
  require(n_traces > 0, "n_traces must be positive");
  require(hidden_dim > 0, "hidden_dim must be positive");
  require(num_layers > 0 && num_layers <= 65535, "num_layers must be in [1, 65535]");
  require(num_heads > 0 && num_heads <= 65535, "num_heads must be in [1, 65535]");
  require(grid >= 2 && grid <= 65535, "grid must be in [2, 65535]");
  require(seq_len_min >= 4 && seq_len_min <= seq_len_max, "seq_len_min must be in [4, seq_len_max]");
  require(prompt_len_min <= prompt_len_max, "prompt_len_min must not exceed prompt_len_max");
  require(prompt_len_max < seq_len_min, "prompt_len_max must be below seq_len_min");
  require(prevalence > 0.0 && prevalence < 1.0, "prevalence must be in (0, 1)");
  require(sigma_correct > 0.0 && sigma_incorrect > 0.0, "sigma_* must be positive");
  require(tau_correct > 0.0 && tau_incorrect > 0.0, "tau_* must be positive");
  require(drift >= 0.0, "drift must be nonnegative");
  require(ar_coef >= 0.0 && ar_coef < 1.0, "ar_coef must be in [0, 1)");
  require(jitter >= 0.0 && head_jitter >= 0.0, "jitter values must be nonnegative");
  require(attn_noise >= 0.0 && attn_noise <= 1.0, "attn_noise must be in [0, 1]");
  require(length_scale > 0.0, "length_scale must be positive");
  for (double f : prefix_fractions) require(f > 0.0 && f < 1.0, "prefix_fractions must lie in (0, 1)");
}

nlohmann::json SyntheticConfig::to_json() const {
  return {
      {"n_traces", n_traces},
      {"seed", seed},
      {"hidden_dim", hidden_dim},
      {"num_layers", num_layers},
      {"num_heads", num_heads},
      {"grid", grid},
      {"seq_len_min", seq_len_min},
      {"seq_len_max", seq_len_max},
      {"prompt_len_min", prompt_len_min},
      {"prompt_len_max", prompt_len_max},
      {"prevalence", prevalence},
      {"sigma_correct", sigma_correct},
      {"sigma_incorrect", sigma_incorrect},
      {"tau_correct", tau_correct},
      {"tau_incorrect", tau_incorrect},
      {"drift", drift},
      {"ar_coef", ar_coef},
      {"jitter", jitter},
      {"head_jitter", head_jitter},
      {"attn_noise", attn_noise},
      {"prefix_fractions", prefix_fractions},
      {"length_scale", length_scale},
      {"backbone_tag", backbone_tag},
  };
}

void SyntheticConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    const char* k = key.c_str();
    if (key == "n_traces") take(j, k, n_traces);
    else if (key == "seed") take(j, k, seed);
    else if (key == "hidden_dim") take(j, k, hidden_dim);
    else if (key == "num_layers") take(j, k, num_layers);
    else if (key == "num_heads") take(j, k, num_heads);
    else if (key == "grid") take(j, k, grid);
    else if (key == "seq_len_min") take(j, k, seq_len_min);
    else if (key == "seq_len_max") take(j, k, seq_len_max);
    else if (key == "prompt_len_min") take(j, k, prompt_len_min);
    else if (key == "prompt_len_max") take(j, k, prompt_len_max);
    else if (key == "prevalence") take(j, k, prevalence);
    else if (key == "sigma_correct") take(j, k, sigma_correct);
    else if (key == "sigma_incorrect") take(j, k, sigma_incorrect);
    else if (key == "tau_correct") take(j, k, tau_correct);
    else if (key == "tau_incorrect") take(j, k, tau_incorrect);
    else if (key == "drift") take(j, k, drift);
    else if (key == "ar_coef") take(j, k, ar_coef);
    else if (key == "jitter") take(j, k, jitter);
    else if (key == "head_jitter") take(j, k, head_jitter);
    else if (key == "attn_noise") take(j, k, attn_noise);
    else if (key == "prefix_fractions") take(j, k, prefix_fractions);
    else if (key == "length_scale") take(j, k, length_scale);
    else if (key == "backbone_tag") take(j, k, backbone_tag);
    else throw ConfigError("unknown key 'synthetic." + key + "'");
  }
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  c.merge_json(j);
  c.validate();
  return c;
}

nlohmann::json PlantedParams::to_json() const {
  return {{"label", label},           {"sigma", sigma},          {"tau", tau},
          {"drift", drift},           {"seq_len", seq_len},      {"prompt_len", prompt_len}};
}

PlantedParams PlantedParams::from_json(const nlohmann::json& j) {
  try {
    PlantedParams p;
    p.label = j.at("label").get<uint8_t>();
    p.sigma = j.at("sigma").get<double>();
    p.tau = j.at("tau").get<double>();
    p.drift = j.at("drift").get<double>();
    p.seq_len = j.at("seq_len").get<std::size_t>();
    p.prompt_len = j.at("prompt_len").get<std::size_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("planted parameters: ") + e.what());
  }
}

std::string trace_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn_%06zu", index);
  return buf;
}

GeneratedTrace generate_trace(const SyntheticConfig& cfg, std::size_t index, std::size_t member) {
  GeneratedTrace g;
  std::normal_distribution<double> nd;

  // Shared across siblings: label, sigma, tau and per-map temperatures.
  auto prng = stream_rng(cfg.seed, index, kParams);
  const uint8_t y = std::bernoulli_distribution(cfg.prevalence)(prng) ? 1 : 0;
  const double sigma = (y ? cfg.sigma_correct : cfg.sigma_incorrect) * std::exp(cfg.jitter * nd(prng));
  const double tau = (y ? cfg.tau_correct : cfg.tau_incorrect) * std::exp(cfg.jitter * nd(prng));
  const std::size_t n_maps = cfg.num_layers * cfg.num_heads;
  std::vector<double> map_tau(n_maps);
  for (auto& t : map_tau) t = tau * std::exp(cfg.head_jitter * nd(prng));

  auto lrng = stream_rng(cfg.seed, index, kLength, member);
  const std::size_t s_lo = scaled(cfg.seq_len_min, cfg.length_scale, member);
  const std::size_t s_hi = std::max(s_lo, scaled(cfg.seq_len_max, cfg.length_scale, member));
  const std::size_t S = std::uniform_int_distribution<std::size_t>(s_lo, s_hi)(lrng);
  const std::size_t Sx = std::min(std::uniform_int_distribution<std::size_t>(cfg.prompt_len_min, cfg.prompt_len_max)(lrng), S - 1);

  g.planted = {y, sigma, tau, cfg.drift * y, S, Sx};

  // Hidden states.
  const std::size_t D = cfg.hidden_dim;
  auto hrng = stream_rng(cfg.seed, index, kHidden, member);
  std::vector<double> mu(D), u(D), e(D);
  for (auto& m : mu) m = 0.5 * nd(hrng);
  double unorm = 0.0;
  for (auto& v : u) {
    v = nd(hrng);
    unorm += v * v;
  }
  unorm = std::sqrt(unorm);
  for (auto& v : u) v /= unorm;
  for (auto& v : e) v = sigma * nd(hrng);
  const double innov = std::sqrt(1.0 - cfg.ar_coef * cfg.ar_coef) * sigma;
  std::vector<float> hidden(S * D);
  for (std::size_t t = 0; t < S; ++t) {
    if (t > 0) {
      for (auto& v : e) v = cfg.ar_coef * v + innov * nd(hrng);
    }
    const double ramp = g.planted.drift * static_cast<double>(t) / static_cast<double>(S - 1);
    for (std::size_t d = 0; d < D; ++d) hidden[t * D + d] = static_cast<float>(mu[d] + e[d] + ramp * u[d]);
  }

  // Attention.
  std::vector<std::size_t> prefix_len;
  for (double f : cfg.prefix_fractions) prefix_len.push_back(compress::prefix_length(S, Sx, f));
  const compress::AttnGridConfig grid{cfg.grid, true};
  const std::size_t k = cfg.grid;
  std::vector<float> attention(n_maps * k * k);
  std::vector<std::vector<float>> prefix_attention(prefix_len.size(), std::vector<float>(n_maps * k * k));
  MatrixD raw(S, S, 0.0);
  std::vector<double> kernel(S);
  for (std::size_t m = 0; m < n_maps; ++m) {
    const double scale = map_tau[m] * static_cast<double>(S);
    for (std::size_t d = 0; d < S; ++d) kernel[d] = std::exp(-static_cast<double>(d) / scale);
    double z = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
      z += kernel[i];
      const double uni = cfg.attn_noise / static_cast<double>(i + 1);
      for (std::size_t j = 0; j <= i; ++j) raw(i, j) = (1.0 - cfg.attn_noise) * kernel[i - j] / z + uni;
    }
    const auto pooled = compress::pool_attention(raw, grid);
    std::copy(pooled.data.begin(), pooled.data.end(), attention.begin() + static_cast<std::ptrdiff_t>(m * k * k));
    for (std::size_t p = 0; p < prefix_len.size(); ++p) {
      const std::size_t n = prefix_len[p];
      MatrixD block(n, n);
      for (std::size_t i = 0; i < n; ++i) std::copy_n(raw.row(i).begin(), n, block.row(i).begin());
      const auto pb = compress::pool_attention(block, grid);
      std::copy(pb.data.begin(), pb.data.end(), prefix_attention[p].begin() + static_cast<std::ptrdiff_t>(m * k * k));
    }
  }

  const std::string id = trace_id(index);
  trace::TraceHeader h;
  h.seq_len = static_cast<uint32_t>(S);
  h.prompt_len = static_cast<uint32_t>(Sx);
  h.hidden_dim = static_cast<uint32_t>(D);
  h.num_layers = static_cast<uint16_t>(cfg.num_layers);
  h.num_heads = static_cast<uint16_t>(cfg.num_heads);
  h.grid = static_cast<uint16_t>(k);
  h.label = y;
  h.backbone_tag = cfg.backbone_tag;

  g.full.header = h;
  g.full.hidden = std::move(hidden);
  g.full.attention = std::move(attention);
  g.full.meta = {{"prompt_id", id}, {"generator", "synthetic"}, {"planted", g.planted.to_json()}};

  for (std::size_t p = 0; p < prefix_len.size(); ++p) {
    trace::GenerationTrace pt;
    pt.header = h;
    pt.header.seq_len = static_cast<uint32_t>(prefix_len[p]);
    pt.hidden.assign(g.full.hidden.begin(), g.full.hidden.begin() + static_cast<std::ptrdiff_t>(prefix_len[p] * D));
    pt.attention = std::move(prefix_attention[p]);
    pt.meta = g.full.meta;
    pt.meta["prefix_fraction"] = cfg.prefix_fractions[p];
    g.prefixes.push_back(std::move(pt));
  }
  return g;
}

GenerationSummary generate(const SyntheticConfig& cfg, const fs::path& out, std::size_t member) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  std::vector<PlantedParams> planted(cfg.n_traces);
  parallel_for(cfg.n_traces, [&](std::size_t i) {
    const auto g = generate_trace(cfg, i, member);
    const fs::path full = out / (trace_id(i) + ".gtrc");
    trace::write_trace(g.full, full);
    for (std::size_t p = 0; p < g.prefixes.size(); ++p) {
      trace::write_trace(g.prefixes[p], trace::prefix_path(full, cfg.prefix_fractions[p]));
    }
    planted[i] = g.planted;
  });
  GenerationSummary s{out, cfg.n_traces, 0, cfg.n_traces * cfg.prefix_fractions.size()};
  nlohmann::json traces = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.n_traces; ++i) {
    s.correct += planted[i].label;
    auto t = planted[i].to_json();
    t["id"] = trace_id(i);
    traces.push_back(std::move(t));
  }
  const nlohmann::json manifest = {{"config", cfg.to_json()},
                                   {"member", member},
                                   {"counts", {{"traces", s.traces}, {"correct", s.correct}, {"prefix_files", s.prefix_files}}},
                                   {"traces", traces}};
  const std::string text = manifest.dump(1);
  io::write_file_atomic(out / "manifest.json",
                        std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  return s;
}

std::vector<GenerationSummary> generate_family(const SyntheticConfig& cfg, const std::vector<std::size_t>& hidden_dims,
                                               const fs::path& out) {
  if (hidden_dims.empty()) throw DomainError("synthetic family needs at least one hidden width");
  std::vector<GenerationSummary> res;
  for (std::size_t m = 0; m < hidden_dims.size(); ++m) {
    SyntheticConfig c = cfg;
    c.hidden_dim = hidden_dims[m];
    res.push_back(generate(c, out / ("d" + std::to_string(hidden_dims[m])), m));
  }
  return res;
}

double planted_llr(const SyntheticConfig& cfg, const PlantedParams& p) {
  double llr = gaussian_llr(std::log(p.sigma), std::log(cfg.sigma_correct), std::log(cfg.sigma_incorrect), cfg.jitter);
  llr += gaussian_llr(std::log(p.tau), std::log(cfg.tau_correct), std::log(cfg.tau_incorrect), cfg.jitter);
  if (cfg.drift > 0.0) llr += p.drift > 0.0 ? kCertain : -kCertain;
  return llr;
}

nlohmann::json OracleReport::to_json() const {
  nlohmann::json feats = nlohmann::json::object();
  for (std::size_t f = 0; f < stats::kNumStats; ++f) {
    feats[std::string(stats::kStatNames[f])] = {{"auroc", feature_auroc[f]},
                                                {"higher_is_correct", feature_higher_is_correct[f]}};
  }
  return {{"n", n}, {"planted_auroc", planted_auroc}, {"sigma_estimate_auroc", sigma_estimate_auroc},
          {"features", feats}};
}

OracleReport oracle_report(const SyntheticConfig& cfg, const trace::TraceSet& ts) {
  const std::size_t n = ts.size();
  std::vector<double> llr(n), sig(n);
  std::vector<std::array<double, stats::kNumStats>> feat(n);
  std::vector<uint8_t> y(n);
  parallel_for(n, [&](std::size_t i) {
    const auto t = trace::read_trace(ts.entries[i].path);
    if (!t.meta.contains("planted")) throw ValidationError(ts.entries[i].id + ": no planted parameters in meta");
    const auto p = PlantedParams::from_json(t.meta["planted"]);
    if (!t.header.labeled() || p.label != t.header.label) {
      throw ValidationError(ts.entries[i].id + ": planted label disagrees with the header");
    }
    y[i] = p.label;
    llr[i] = planted_llr(cfg, p);
    const std::size_t S = t.header.seq_len, D = t.header.hidden_dim;
    double ss = 0.0;
    for (std::size_t r = 1; r < S; ++r) {
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = double(t.hidden[r * D + d]) - double(t.hidden[(r - 1) * D + d]);
        ss += diff * diff;
      }
    }
    // Var(e_t - e_{t-1}) = 2 sigma^2 (1 - a); lower sigma = correct.
    sig[i] = -std::sqrt(ss / (double((S - 1) * D) * 2.0 * (1.0 - cfg.ar_coef)));
    const auto fs = stats::stat_features_batch(t.attention, t.header.num_maps(), t.header.grid, t.header.num_heads);
    feat[i].fill(0.0);
    for (std::size_t m = 0; m < fs.rows; ++m) {
      for (std::size_t f = 0; f < stats::kNumStats; ++f) feat[i][f] += fs(m, f) / double(fs.rows);
    }
  });
  const auto pos = std::count(y.begin(), y.end(), uint8_t{1});
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(n)) throw DegenerateError("oracle needs both classes");

  // AUROC only depends on the ordering, so keys go through dense ranks into
  // [0, 1]; equal keys stay tied and nothing else merges.
  auto rank_auroc = [&](const std::vector<double>& key) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    std::vector<double> rank(n);
    std::size_t dense = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0 && key[idx[t]] != key[idx[t - 1]]) ++dense;
      rank[idx[t]] = static_cast<double>(dense);
    }
    for (auto& v : rank) v = dense > 0 ? v / static_cast<double>(dense) : 0.5;
    return eval::auroc(rank, y);
  };
  OracleReport r;
  r.n = n;
  r.planted_auroc = rank_auroc(llr);
  r.sigma_estimate_auroc = rank_auroc(sig);
  for (std::size_t f = 0; f < stats::kNumStats; ++f) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = feat[i][f];
    const double a = rank_auroc(col);
    r.feature_auroc[f] = std::max(a, 1.0 - a);
    r.feature_higher_is_correct[f] = a >= 0.5;
  }
  return r;
}

}  // namespace gnosis::synth
