// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/cli.hpp"

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnosis/attn_stats.hpp"
#include "gnosis/binary_io.hpp"
#include "gnosis/checkpoint.hpp"
#include "gnosis/errors.hpp"
#include "gnosis/evaluation.hpp"
#include "gnosis/model.hpp"
#include "gnosis/synthetic.hpp"
#include "gnosis/trace_store.hpp"
#include "gnosis/training.hpp"

namespace gnosis::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct OptSpec {
  const char* name;
  const char* fallback;  // nullptr for boolean flags
  const char* help;
};

struct Command {
  const char* name;
  const char* help;
  const char* preset;
  std::vector<OptSpec> opts;
  const char* positional = nullptr;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"gen-synthetic",
       "write a synthetic trace set with planted separability, its manifest and oracle report",
       "desk",
       {{"n", "", "number of traces (synthetic.n_traces)"},
        {"seed", "", "generator seed (synthetic.seed)"},
        {"family", "", "comma-separated hidden widths; one sibling set per width under <out>/d<width>"}}},
      {"train",
       "train a probe on a trace directory",
       "desk",
       {{"traces", "", "trace directory (required)"}, {"resume", "", "checkpoint to continue from"}}},
      {"score",
       "score every trace and write scores.csv",
       "desk",
       {{"checkpoint", "", "trained checkpoint (required)"},
        {"traces", "", "trace directory (required)"},
        {"adapter-seed", "", "orthonormal hidden adapter seed for traces of another width"}}},
      {"eval",
       "evaluate a checkpoint or an external score file",
       "desk",
       {{"checkpoint", "", "trained checkpoint"},
        {"scores", "", "score CSV (trace_id,p_hat[,label]) instead of a checkpoint"},
        {"traces", "", "trace directory (required)"},
        {"bins", "10", "calibration bins"},
        {"equal-mass", nullptr, "equal-mass instead of equal-width calibration bins"},
        {"descriptors", nullptr, "also write per-trace descriptors to descriptors.csv"}}},
      {"eval-sibling",
       "score traces of a sibling backbone with a trained head",
       "desk",
       {{"checkpoint", "", "trained checkpoint (required)"},
        {"traces", "", "sibling trace directory (required)"},
        {"adapter-seed", "", "orthonormal hidden adapter seed, needed when hidden widths differ"},
        {"bins", "10", "calibration bins"},
        {"equal-mass", nullptr, "equal-mass calibration bins"}}},
      {"eval-early",
       "evaluate on generation prefixes and write the per-fraction sweep",
       "desk",
       {{"checkpoint", "", "trained checkpoint (required)"},
        {"traces", "", "trace directory with prefix payloads (required)"},
        {"fractions", "0.2,0.4,0.6,0.8,1.0", "comma-separated prefix fractions"},
        {"bins", "10", "calibration bins"},
        {"equal-mass", nullptr, "equal-mass calibration bins"}}},
      {"inspect-trace",
       "print the per-map statistics table of one trace as CSV",
       "desk",
       {{"trace", "", "GTRC file"}},
       "trace"},
      {"grad-check",
       "finite-difference check of the full model at 64-bit",
       "desk",
       {{"tolerance", "1e-4", "maximum relative error"},
        {"per-tensor", "3", "sampled coordinates per parameter tensor"},
        {"seed", "0", "model and sampling seed"}}},
      {"param-count",
       "print per-group parameter counts",
       "paper",
       {{"backbone-dim", "2048", "hidden width D"}, {"layers", "6", "selected layers"}, {"heads", "16", "heads"}}},
  };
  return cmds;
}

const Command& find_command(const std::string& name) {
  for (const auto& c : commands()) {
    if (name == c.name) return c;
  }
  throw ConfigError("unknown subcommand '" + name + "'");
}

struct Ctx {
  const Command* cmd = nullptr;
  json args = json::object();
  std::string preset;
  model::ModelConfig model_cfg;
  train::TrainConfig train_cfg;
  synth::SyntheticConfig syn_cfg;
  fs::path out;
  std::ostream* out_s = nullptr;
  std::ostream* err_s = nullptr;
  int verbosity = 1;

  std::string str(const std::string& k) const {
    if (!args.contains(k) || args[k].is_null()) return {};
    const auto& v = args[k];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
  bool flag(const std::string& k) const { return args.contains(k) && args[k].is_boolean() && args[k].get<bool>(); }
  std::string required(const std::string& k) const {
    auto v = str(k);
    if (v.empty()) throw ConfigError("--" + k + " is required for " + cmd->name);
    return v;
  }
  double number(const std::string& k) const {
    const auto s = str(k);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("--" + k + ": '" + s + "' is not a number");
    return v;
  }
  std::size_t count(const std::string& k) const {
    const double v = number(k);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ConfigError("--" + k + ": '" + str(k) + "' is not a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
  }
  void note(const std::string& msg) const {
    if (verbosity > 0) *err_s << msg << "\n";
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(s);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& cell : split_list(s)) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || used == 0) throw ConfigError(std::string(what) + ": '" + cell + "' is not a number");
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

void set_path(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  std::vector<std::string> parts;
  std::istringstream is(key);
  for (std::string p; std::getline(is, p, '.');) parts.push_back(p);
  static const std::vector<std::string> roots = {"preset", "model", "train", "synthetic", "args"};
  if (parts.empty() || std::find(roots.begin(), roots.end(), parts[0]) == roots.end()) {
    throw ConfigError("--set: unknown key '" + key + "' (roots: preset, model, train, synthetic, args)");
  }
  json* node = &tree;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

void merge_config_file(json& tree, const fs::path& path, const Command& cmd) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json file;
  try {
    file = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!file.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
  for (const auto& [key, val] : file.items()) {
    if (key == "subcommand") {
      if (val != cmd.name) {
        throw ConfigError("config file was written for '" + val.get<std::string>() + "', not '" + cmd.name + "'");
      }
    } else if (key == "preset") {
      tree["preset"] = val;
    } else if (key == "model" || key == "train" || key == "synthetic" || key == "args") {
      if (!val.is_object()) throw ConfigError("config key '" + key + "' must be an object");
      for (const auto& [k, v] : val.items()) tree[key][k] = v;
    } else {
      throw ConfigError("unknown key '" + key + "' in " + path.string());
    }
  }
}

eval::EvalOptions eval_options(const Ctx& c) {
  eval::EvalOptions o;
  o.bins = c.count("bins");
  if (o.bins == 0) throw ConfigError("--bins must be positive");
  o.scheme = c.flag("equal-mass") ? eval::BinScheme::kEqualMass : eval::BinScheme::kEqualWidth;
  return o;
}

void write_report(const Ctx& c, const std::string& stem, const eval::EvalReport& r) {
  write_text(c.out / (stem + ".json"), r.to_json().dump(2) + "\n");
  write_text(c.out / (stem + ".csv"), std::string(eval::kReportCsvHeader) + "\n" + eval::report_csv_row(r) + "\n");
  write_text(c.out / (stem + "_reliability.csv"), eval::reliability_csv(r));
  *c.out_s << r.to_json().dump(2) << "\n";
}

std::optional<eval::HiddenAdapter> adapter_for(const Ctx& c, const model::GnosisModel<float>& m,
                                               const trace::TraceSet& ts) {
  if (c.str("adapter-seed").empty()) return std::nullopt;
  return eval::HiddenAdapter::orthonormal(ts.geometry.hidden_dim, m.geometry().hidden_dim, c.count("adapter-seed"));
}

// ---------------------------------------------------------------------------

void cmd_gen_synthetic(Ctx& c) {
  std::vector<std::size_t> dims;
  for (double d : parse_numbers(c.str("family"), "--family")) {
    if (d < 1 || d != static_cast<double>(static_cast<std::size_t>(d))) throw ConfigError("--family widths must be positive integers");
    dims.push_back(static_cast<std::size_t>(d));
  }
  std::vector<synth::GenerationSummary> made;
  if (dims.empty()) {
    made.push_back(synth::generate(c.syn_cfg, c.out));
  } else {
    made = synth::generate_family(c.syn_cfg, dims, c.out);
  }
  json summary = json::array();
  for (std::size_t m = 0; m < made.size(); ++m) {
    auto cfg = c.syn_cfg;
    if (!dims.empty()) cfg.hidden_dim = dims[m];
    const auto ts = trace::scan_traceset(made[m].directory);
    json oracle = nullptr;
    try {
      const auto r = synth::oracle_report(cfg, ts);
      oracle = r.to_json();
      write_text(made[m].directory / "oracle.json", oracle.dump(2) + "\n");
    } catch (const DegenerateError& e) {
      c.note(std::string("oracle skipped: ") + e.what());
    }
    summary.push_back({{"directory", made[m].directory.string()},
                       {"traces", made[m].traces},
                       {"correct", made[m].correct},
                       {"prefix_files", made[m].prefix_files},
                       {"planted_auroc", oracle.is_null() ? json(nullptr) : oracle["planted_auroc"]}});
  }
  *c.out_s << summary.dump(2) << "\n";
}

void cmd_train(Ctx& c) {
  const auto ts = trace::scan_traceset(c.required("traces"));
  for (const auto& r : ts.rejected) c.note("rejected " + r.path.string() + ": " + r.reason);
  const auto split = train::build_dataset(ts, c.train_cfg.seed, c.train_cfg.eval_fraction);
  c.note("training on " + std::to_string(split.train.size()) + " traces, validating on " +
         std::to_string(split.val.size()));
  if (!c.str("resume").empty()) {
    train::resume(c.str("resume"), split, c.train_cfg, c.out);
  } else {
    model::GnosisModel<float> m(c.model_cfg, model::ModelGeometry::of(ts.geometry), c.train_cfg.seed);
    train::train(m, split, c.train_cfg, c.out);
  }
  std::ifstream in(c.out / "train_summary.json");
  *c.out_s << in.rdbuf();
}

void cmd_score(Ctx& c) {
  const auto m = model::load_checkpoint(c.required("checkpoint")).model;
  const auto ts = trace::scan_traceset(c.required("traces"));
  const auto adapter = adapter_for(c, m, ts);
  const auto scored = eval::score_traces(m, ts, adapter ? &*adapter : nullptr);
  eval::write_score_file(c.out / "scores.csv", scored);
  *c.out_s << json{{"scores", (c.out / "scores.csv").string()}, {"n", scored.size()}}.dump(2) << "\n";
}

void cmd_eval(Ctx& c) {
  const auto opt = eval_options(c);
  const auto ts = trace::scan_traceset(c.required("traces"));
  const auto ckpt = c.str("checkpoint"), scores = c.str("scores");
  if (ckpt.empty() == scores.empty()) throw ConfigError("eval needs exactly one of --checkpoint and --scores");
  if (!scores.empty()) {
    if (c.flag("descriptors")) throw ConfigError("--descriptors needs --checkpoint");
    write_report(c, "eval_report", eval::evaluate_scores(eval::read_score_file(scores), ts, opt));
    return;
  }
  const auto m = model::load_checkpoint(ckpt).model;
  if (c.flag("descriptors")) eval::dump_descriptors(m, ts, c.out / "descriptors.csv");
  write_report(c, "eval_report", eval::evaluate(m, ts, opt));
}

void cmd_eval_sibling(Ctx& c) {
  const auto opt = eval_options(c);
  const auto m = model::load_checkpoint(c.required("checkpoint")).model;
  const auto ts = trace::scan_traceset(c.required("traces"));
  const auto adapter = adapter_for(c, m, ts);
  write_report(c, "sibling_report", eval::evaluate_sibling(m, ts, adapter ? &*adapter : nullptr, opt));
}

void cmd_eval_early(Ctx& c) {
  const auto opt = eval_options(c);
  const auto fractions = parse_numbers(c.str("fractions"), "--fractions");
  const auto m = model::load_checkpoint(c.required("checkpoint")).model;
  const auto ts = trace::scan_traceset(c.required("traces"));
  const auto reports = eval::evaluate_early(m, ts, fractions, opt);
  std::string csv = std::string(eval::kSweepCsvHeader) + "\n";
  json all = json::array();
  for (const auto& r : reports) {
    csv += eval::sweep_csv_row(r) + "\n";
    all.push_back(r.to_json());
  }
  write_text(c.out / "early_sweep.csv", csv);
  write_text(c.out / "early_sweep.json", all.dump(2) + "\n");
  *c.out_s << csv;
}

void cmd_inspect_trace(Ctx& c) {
  const fs::path path = c.required("trace");
  const auto t = trace::read_trace(path);
  const auto& h = t.header;
  const auto feats = stats::stat_features_batch(t.attention, h.num_maps(), h.grid, h.num_heads);
  std::ostringstream csv;
  csv.precision(17);
  csv << "layer,head";
  for (auto name : stats::kStatNames) csv << "," << name;
  csv << "\n";
  for (std::size_t m = 0; m < feats.rows; ++m) {
    csv << m / h.num_heads << "," << m % h.num_heads;
    for (std::size_t f = 0; f < stats::kNumStats; ++f) csv << "," << feats(m, f);
    csv << "\n";
  }
  const json header = {{"seq_len", h.seq_len},       {"prompt_len", h.prompt_len}, {"hidden_dim", h.hidden_dim},
                       {"num_layers", h.num_layers}, {"num_heads", h.num_heads},   {"grid", h.grid},
                       {"label", h.label},           {"backbone_tag", h.backbone_tag}, {"meta", t.meta}};
  const std::string stem = path.stem().string();
  write_text(c.out / (stem + "_stats.csv"), csv.str());
  write_text(c.out / (stem + "_header.json"), header.dump(2) + "\n");
  *c.out_s << csv.str();
}

void cmd_grad_check(Ctx& c) {
  const double tol = c.number("tolerance");
  const std::size_t per_tensor = c.count("per-tensor");
  const uint64_t seed = c.count("seed");
  const auto g = synth::generate_trace(c.syn_cfg, 0);
  model::GnosisModel<double> m(c.model_cfg, model::ModelGeometry::of(trace::Geometry::of(g.full.header)), seed);
  const auto r = model::grad_check_model(m, m.prepare(g.full), g.full.header.label, tol, per_tensor, seed);
  const json j = {{"max_rel_error", r.max_rel_error}, {"max_abs_error", r.max_abs_error}, {"checked", r.checked},
                  {"worst", r.worst},                 {"tolerance", r.tolerance},         {"passed", r.passed}};
  write_text(c.out / "grad_check.json", j.dump(2) + "\n");
  *c.out_s << j.dump(2) << "\n";
  if (!r.passed) {
    throw NumericError("gradient check failed: max relative error " + std::to_string(r.max_rel_error) + " at " +
                       r.worst);
  }
}

void cmd_param_count(Ctx& c) {
  const model::ModelGeometry geo{c.count("backbone-dim"), c.count("layers"), c.count("heads")};
  const auto pc = model::param_count(c.model_cfg, geo);
  auto band = [](std::size_t v, double anchor) {
    const double lo = anchor * (1.0 - model::kParamBand), hi = anchor * (1.0 + model::kParamBand);
    return json{{"anchor", anchor}, {"low", lo}, {"high", hi}, {"within", double(v) >= lo && double(v) <= hi}};
  };
  const json j = {{"preset", c.preset},
                  {"geometry", geo.to_json()},
                  {"hidden", pc.hidden},
                  {"attn", pc.attn},
                  {"fusion", pc.fusion},
                  {"total", pc.total},
                  {"bands",
                   {{"hidden", band(pc.hidden, model::kHiddenParamAnchor)},
                    {"attn", band(pc.attn, model::kAttnParamAnchor)},
                    {"total", band(pc.total, model::kTotalParamAnchor)}}}};
  write_text(c.out / "param_count.json", j.dump(2) + "\n");
  *c.out_s << j.dump(2) << "\n";
}

void dispatch(Ctx& c) {
  const std::string n = c.cmd->name;
  if (n == "gen-synthetic") cmd_gen_synthetic(c);
  else if (n == "train") cmd_train(c);
  else if (n == "score") cmd_score(c);
  else if (n == "eval") cmd_eval(c);
  else if (n == "eval-sibling") cmd_eval_sibling(c);
  else if (n == "eval-early") cmd_eval_early(c);
  else if (n == "inspect-trace") cmd_inspect_trace(c);
  else if (n == "grad-check") cmd_grad_check(c);
  else if (n == "param-count") cmd_param_count(c);
}

// Resolves the trees and the output directory; writes the echo.
void resolve(Ctx& c, json tree) {
  c.preset = tree.value("preset", std::string(c.cmd->preset));
  c.model_cfg = model::ModelConfig::preset(c.preset);
  c.model_cfg.merge_json(tree["model"]);
  c.train_cfg.merge_json(tree["train"]);
  if (tree["train"].contains("ablation")) c.model_cfg.ablation = c.train_cfg.ablation;
  else c.train_cfg.ablation = c.model_cfg.ablation;
  c.syn_cfg.merge_json(tree["synthetic"]);
  c.args = tree["args"];
  for (const auto& [k, v] : c.args.items()) {
    const bool known = k == "out" || k == "threads" ||
                       std::any_of(c.cmd->opts.begin(), c.cmd->opts.end(), [&](const OptSpec& o) { return k == o.name; });
    if (!known) throw ConfigError("unknown key 'args." + k + "' for " + c.cmd->name);
  }
  if (!c.str("n").empty()) c.syn_cfg.n_traces = c.count("n");
  if (!c.str("seed").empty() && std::string(c.cmd->name) == "gen-synthetic") c.syn_cfg.seed = c.count("seed");
  c.model_cfg.validate();
  c.train_cfg.validate();
  c.syn_cfg.validate();

  std::string out = c.str("out");
  if (out.empty()) {
    const char* env = std::getenv("GNOSIS_OUT");
    out = env != nullptr && *env != '\0' ? env : kDefaultOutDir;
  }
  c.out = out;
  if (!c.str("threads").empty()) {
    const auto t = c.count("threads");
    if (t == 0) throw ConfigError("--threads must be positive");
    omp_set_num_threads(static_cast<int>(t));
  }

  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out.string() + ": " + ec.message());
  const json echo = {{"subcommand", c.cmd->name},
                     {"preset", c.preset},
                     {"model", c.model_cfg.to_json()},
                     {"train", c.train_cfg.to_json()},
                     {"synthetic", c.syn_cfg.to_json()},
                     {"args", c.args}};
  write_text(c.out / kEffectiveConfigFile, echo.dump(2) + "\n");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gnosis: correctness probes over generation traces"};
  app.require_subcommand(1, 1);

  // Option storage; std::map keeps references stable.
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, std::vector<std::string>> sets;
  std::map<std::string, std::string> config_path, preset, out_dir, threads;
  std::map<std::string, int> verbose, quiet;
  std::map<std::string, CLI::App*> subs;

  for (const auto& cmd : commands()) {
    const std::string n = cmd.name;
    auto* sub = app.add_subcommand(n, cmd.help);
    subs[n] = sub;
    sub->add_option("--config", config_path[n], "JSON config file with model/train/synthetic/args trees");
    sub->add_option("--set", sets[n], "override, e.g. train.batch_size=8 (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->expected(1);
    sub->add_option("--preset", preset[n], std::string("model preset: paper or desk (default ") + cmd.preset + ")");
    sub->add_option("--out", out_dir[n], "output directory (default $GNOSIS_OUT, else ./gnosis_out)");
    sub->add_option("--threads", threads[n], "worker thread cap");
    sub->add_flag("-v,--verbose", verbose[n], "more progress output");
    sub->add_flag("-q,--quiet", quiet[n], "no progress output");
    for (const auto& o : cmd.opts) {
      if (cmd.positional != nullptr && std::string(cmd.positional) == o.name) {
        sub->add_option(o.name, values[n][o.name], o.help);
      } else if (o.fallback == nullptr) {
        sub->add_flag(std::string("--") + o.name, flags[n][o.name], o.help);
      } else {
        sub->add_option(std::string("--") + o.name, values[n][o.name], o.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitValidation;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Ctx c;
  c.out_s = &out;
  c.err_s = &err;
  c.verbosity = 1 + verbose[name] - (quiet[name] > 0 ? 2 : 0);
  try {
    const Command& cmd = find_command(name);
    c.cmd = &cmd;
    json tree = {{"model", json::object()}, {"train", json::object()}, {"synthetic", json::object()},
                 {"args", json::object()}};
    for (const auto& o : cmd.opts) tree["args"][o.name] = o.fallback == nullptr ? json(false) : json(o.fallback);
    if (!config_path[name].empty()) merge_config_file(tree, config_path[name], cmd);
    for (const auto& s : sets[name]) set_path(tree, s);
    if (sub->count("--preset") > 0) tree["preset"] = preset[name];
    if (sub->count("--out") > 0) tree["args"]["out"] = out_dir[name];
    if (sub->count("--threads") > 0) tree["args"]["threads"] = threads[name];
    for (const auto& o : cmd.opts) {
      const bool positional = cmd.positional != nullptr && std::string(cmd.positional) == o.name;
      const std::string flag = positional ? std::string(o.name) : std::string("--") + o.name;
      if (sub->count(flag) == 0) continue;
      tree["args"][o.name] = o.fallback == nullptr ? json(flags[name][o.name]) : json(values[name][o.name]);
    }
    resolve(c, tree);
    dispatch(c);
    return kExitOk;
  } catch (const ValidationFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace gnosis::cli
