// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gnosis/compression.hpp"
#include "gnosis/errors.hpp"
#include "gnosis/parallel.hpp"

namespace gnosis::eval {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

void check_sibling_geometry(const model::GnosisModel<float>& model, const trace::Geometry& g,
                            const HiddenAdapter* adapter) {
  const auto& mg = model.geometry();
  if (g.num_layers != mg.num_layers) {
    throw ConfigError("num_layers: traces have " + std::to_string(g.num_layers) + ", model expects " +
                      std::to_string(mg.num_layers));
  }
  if (g.num_heads != mg.num_heads) {
    throw ConfigError("num_heads: traces have " + std::to_string(g.num_heads) + ", model expects " +
                      std::to_string(mg.num_heads));
  }
  if (adapter == nullptr) {
    if (g.hidden_dim != mg.hidden_dim) {
      throw ConfigError("hidden_dim: traces have " + std::to_string(g.hidden_dim) + ", model expects " +
                        std::to_string(mg.hidden_dim) + " (supply a hidden adapter)");
    }
    return;
  }
  if (adapter->in_dim != g.hidden_dim || adapter->out_dim != mg.hidden_dim) {
    throw ConfigError("hidden adapter maps " + std::to_string(adapter->in_dim) + " -> " +
                      std::to_string(adapter->out_dim) + ", need " + std::to_string(g.hidden_dim) + " -> " +
                      std::to_string(mg.hidden_dim));
  }
}

}  // namespace

HiddenAdapter HiddenAdapter::orthonormal(std::size_t in_dim, std::size_t out_dim, uint64_t seed) {
  if (in_dim == 0 || out_dim == 0) throw DomainError("hidden adapter dimensions must be positive");
  // Gram-Schmidt over the shorter side of a Gaussian matrix.
  const bool narrow = out_dim <= in_dim;
  const std::size_t vecs = narrow ? out_dim : in_dim, len = narrow ? in_dim : out_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> basis;
  while (basis.size() < vecs) {
    std::vector<double> v(len);
    for (auto& x : v) x = nd(rng);
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t i = 0; i < len; ++i) d += v[i] * b[i];
      for (std::size_t i = 0; i < len; ++i) v[i] -= d * b[i];
    }
    double norm = 0.0;
    for (auto x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  HiddenAdapter a{in_dim, out_dim, std::vector<float>(in_dim * out_dim)};
  for (std::size_t i = 0; i < in_dim; ++i) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      a.weight[i * out_dim + o] = static_cast<float>(narrow ? basis[o][i] : basis[i][o]);
    }
  }
  return a;
}

trace::GenerationTrace HiddenAdapter::apply(const trace::GenerationTrace& t) const {
  if (t.header.hidden_dim != in_dim) {
    throw ShapeError("hidden adapter expects width " + std::to_string(in_dim) + ", trace has " +
                     std::to_string(t.header.hidden_dim));
  }
  trace::GenerationTrace out = t;
  const std::size_t s = t.header.seq_len;
  out.header.hidden_dim = static_cast<uint32_t>(out_dim);
  out.hidden.assign(s * out_dim, 0.0f);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in_dim; ++i) acc += double(t.hidden[r * in_dim + i]) * weight[i * out_dim + o];
      out.hidden[r * out_dim + o] = static_cast<float>(acc);
    }
  }
  return out;
}

std::vector<ScoredExample> score_traces(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                                        const HiddenAdapter* adapter) {
  std::vector<ScoredExample> out(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const auto& e = ts.entries[i];
    auto t = trace::read_trace(e.path);
    if (adapter != nullptr) t = adapter->apply(t);
    out[i] = {e.id, model.score(t), e.header.label};
  });
  return out;
}

EvalReport report_of(std::span<const ScoredExample> scored, const EvalOptions& opt) {
  std::vector<double> p;
  std::vector<uint8_t> y;
  for (const auto& s : scored) {
    if (s.y > 1) continue;
    p.push_back(s.p);
    y.push_back(s.y);
  }
  if (p.empty()) throw DegenerateError("no labeled traces to evaluate");
  return make_report(p, y, opt.bins, opt.scheme);
}

EvalReport evaluate(const model::GnosisModel<float>& model, const trace::TraceSet& ts, const EvalOptions& opt) {
  return report_of(score_traces(model, ts), opt);
}

EvalReport evaluate_sibling(const model::GnosisModel<float>& model, const trace::TraceSet& sibling,
                            const HiddenAdapter* adapter, const EvalOptions& opt) {
  check_sibling_geometry(model, sibling.geometry, adapter);
  const bool needs = adapter != nullptr && sibling.geometry.hidden_dim != model.geometry().hidden_dim;
  return report_of(score_traces(model, sibling, needs ? adapter : nullptr), opt);
}

std::vector<EvalReport> evaluate_early(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                                       std::span<const double> fractions, const EvalOptions& opt) {
  if (fractions.empty()) throw DomainError("no prefix fractions given");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw DomainError("prefix fraction " + std::to_string(f) + " is outside (0, 1]");
  }
  for (double f : fractions) {
    if (f == 1.0) continue;
    std::string missing;
    std::size_t count = 0;
    for (const auto& e : ts.entries) {
      if (e.prefixes.count(trace::fraction_key(f)) != 0) continue;
      if (count++ < 20) missing += (missing.empty() ? "" : ", ") + e.id;
    }
    if (count > 0) {
      throw ValidationError("no prefix payload for fraction " + std::to_string(f) + " in " + std::to_string(count) +
                            " trace(s): " + missing + (count > 20 ? ", ..." : ""));
    }
  }
  std::vector<EvalReport> reports;
  for (double f : fractions) {
    std::vector<ScoredExample> scored(ts.size());
    parallel_for(ts.size(), [&](std::size_t i) {
      const auto& e = ts.entries[i];
      const auto full = trace::read_trace(e.path);
      trace::GenerationTrace view;
      if (f == 1.0) {
        view = compress::prefix_view(full, f);
      } else {
        const auto payload = trace::read_trace(e.prefixes.at(trace::fraction_key(f)));
        view = compress::prefix_view(full, f, &payload);
      }
      scored[i] = {e.id, model.score(view), e.header.label};
    });
    auto r = report_of(scored, opt);
    r.prefix_fraction = f;
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<ScoredExample> read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).rfind("trace_id,p_hat", 0) != 0) {
    throw ValidationError(path.string() + ": expected header '" + kScoreCsvHeader + "'");
  }
  std::vector<ScoredExample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() < 2 || cells.size() > 3) throw ValidationError(where + ": expected 2 or 3 columns");
    ScoredExample s;
    s.id = trim(cells[0]);
    std::size_t used = 0;
    try {
      s.p = std::stod(cells[1], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != trim(cells[1]).size()) throw ValidationError(where + ": bad p_hat '" + cells[1] + "'");
    if (cells.size() == 3 && !trim(cells[2]).empty()) {
      const auto lab = trim(cells[2]);
      if (lab != "0" && lab != "1") throw ValidationError(where + ": label must be 0 or 1");
      s.y = static_cast<uint8_t>(lab[0] - '0');
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_score_file(const std::filesystem::path& path, std::span<const ScoredExample> scored) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << kScoreCsvHeader << "\n";
  for (const auto& s : scored) {
    out << s.id << "," << s.p << ",";
    if (s.y <= 1) out << int(s.y);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EvalReport evaluate_scores(std::span<const ScoredExample> scored, const trace::TraceSet& ts, const EvalOptions& opt) {
  std::map<std::string, const ScoredExample*> by_id;
  for (const auto& s : scored) {
    if (!by_id.emplace(s.id, &s).second) throw ValidationError("score file lists '" + s.id + "' twice");
  }
  std::vector<ScoredExample> joined;
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& e : ts.entries) {
    if (!e.header.labeled()) continue;
    const auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      if (n_missing++ < 20) missing += (missing.empty() ? "" : ", ") + e.id;
      continue;
    }
    if (it->second->y <= 1 && it->second->y != e.header.label) {
      throw ValidationError("score file label for '" + e.id + "' disagrees with the trace");
    }
    joined.push_back({e.id, it->second->p, e.header.label});
  }
  if (n_missing > 0) {
    throw ValidationError("no score for " + std::to_string(n_missing) + " trace(s): " + missing +
                          (n_missing > 20 ? ", ..." : ""));
  }
  return report_of(joined, opt);
}

void dump_descriptors(const model::GnosisModel<float>& model, const trace::TraceSet& ts,
                      const std::filesystem::path& path) {
  std::vector<std::vector<float>> rows(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const auto x = model.prepare(trace::read_trace(ts.entries[i].path));
    ad::Tape<float> tape;
    const auto r = model.forward(tape, x);
    rows[i].assign(r.z_hid.values().begin(), r.z_hid.values().end());
    rows[i].insert(rows[i].end(), r.z_attn.values().begin(), r.z_attn.values().end());
  });
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  const auto& cfg = model.config();
  out << "trace_id,label";
  for (std::size_t j = 0; j < cfg.d_hid; ++j) out << ",z_hid_" << j;
  for (std::size_t j = 0; j < cfg.d_att; ++j) out << ",z_attn_" << j;
  out << "\n";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out << ts.entries[i].id << ",";
    if (ts.entries[i].header.labeled()) out << int(ts.entries[i].header.label);
    for (float v : rows[i]) out << "," << v;
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gnosis::eval
