// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnosis/cli.hpp"
#include "support/fixtures.hpp"

using gnosis::testing::ScratchDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result gnosis_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gnosis");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gnosis::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

const std::vector<std::string> kSmallSet = {
    "--set", "synthetic.seq_len_min=40", "--set", "synthetic.seq_len_max=80",
    "--set", "synthetic.prompt_len_min=4", "--set", "synthetic.prompt_len_max=8"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// One generated set and one trained checkpoint, shared by the pipeline cases.
struct Pipeline {
  ScratchDir root{"cli_pipeline"};
  fs::path data = root / "data";
  fs::path run = root / "run";

  Pipeline() {
    auto g = gnosis_cli(cat({"gen-synthetic", "--n", "48", "--seed", "3", "--out", data.string(), "-q"}, kSmallSet));
    REQUIRE_MESSAGE(g.code == 0, g.err);
    auto t = gnosis_cli({"train", "--traces", data.string(), "--out", run.string(), "--set", "train.epochs=1", "--set",
                         "train.batch_size=8", "-q"});
    REQUIRE_MESSAGE(t.code == 0, t.err);
  }
  std::string checkpoint() const { return (run / "final.gnsw").string(); }
};

}  // namespace

TEST_CASE("usage errors exit 1 and print help") {
  CHECK(gnosis_cli({}).code == gnosis::cli::kExitValidation);
  const auto bad = gnosis_cli({"frobnicate"});
  CHECK(bad.code == gnosis::cli::kExitValidation);
  const auto flag = gnosis_cli({"train", "--bogus", "1"});
  CHECK(flag.code == gnosis::cli::kExitValidation);
  CHECK(flag.err.find("--traces") != std::string::npos);
  const auto help = gnosis_cli({"eval", "--help"});
  CHECK(help.code == gnosis::cli::kExitOk);
  CHECK(help.out.find("--equal-mass") != std::string::npos);
}

TEST_CASE("validation errors exit 1, runtime errors exit 2") {
  ScratchDir dir("cli_codes");
  const auto out = (dir / "o").string();
  CHECK(gnosis_cli({"param-count", "--out", out, "--set", "train.batch_size=0"}).code == gnosis::cli::kExitValidation);
  CHECK(gnosis_cli({"param-count", "--out", out, "--set", "nonsense.x=1"}).code == gnosis::cli::kExitValidation);
  CHECK(gnosis_cli({"param-count", "--out", out, "--set", "model.no_such_field=1"}).code ==
        gnosis::cli::kExitValidation);
  CHECK(gnosis_cli({"train", "--out", out}).code == gnosis::cli::kExitValidation);
  CHECK(gnosis_cli({"param-count", "--out", out, "--layers", "x"}).code == gnosis::cli::kExitValidation);

  std::ofstream(dir / "blocker") << "file";
  const auto io = gnosis_cli({"param-count", "--out", (dir / "blocker" / "sub").string()});
  CHECK(io.code == gnosis::cli::kExitRuntime);

  std::ofstream(dir / "broken.gnsw") << "not a checkpoint";
  fs::create_directories(dir / "empty");
  CHECK(gnosis_cli({"eval", "--checkpoint", (dir / "broken.gnsw").string(), "--traces", (dir / "empty").string(),
                    "--out", out})
            .code != gnosis::cli::kExitOk);
}

TEST_CASE("the effective configuration is written before work starts") {
  ScratchDir dir("cli_echo");
  fs::create_directories(dir / "empty");
  const auto r = gnosis_cli({"train", "--traces", (dir / "empty").string(), "--out", (dir / "o").string(), "--set",
                             "train.learning_rate=0.01"});
  CHECK(r.code == gnosis::cli::kExitValidation);
  REQUIRE(fs::exists(dir / "o" / gnosis::cli::kEffectiveConfigFile));
  const auto echo = read_json(dir / "o" / gnosis::cli::kEffectiveConfigFile);
  CHECK(echo["subcommand"] == "train");
  CHECK(echo["train"]["learning_rate"] == 0.01);
  CHECK(echo["args"]["traces"] == (dir / "empty").string());
}

TEST_CASE("precedence: defaults, config file, --set, flags") {
  ScratchDir dir("cli_precedence");
  std::ofstream(dir / "cfg.json") << R"({"preset": "desk", "train": {"epochs": 5, "batch_size": 4},
                                         "args": {"layers": "3"}})";
  const auto r = gnosis_cli({"param-count", "--config", (dir / "cfg.json").string(), "--set", "train.epochs=6",
                             "--set", "args.heads=\"5\"", "--heads", "7", "--out", (dir / "o").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto echo = read_json(dir / "o" / gnosis::cli::kEffectiveConfigFile);
  CHECK(echo["preset"] == "desk");
  CHECK(echo["train"]["epochs"] == 6);
  CHECK(echo["train"]["batch_size"] == 4);
  CHECK(echo["args"]["layers"] == "3");
  CHECK(echo["args"]["heads"] == "7");
  const auto pc = read_json(dir / "o" / "param_count.json");
  CHECK(pc["geometry"]["num_layers"] == 3);
  CHECK(pc["geometry"]["num_heads"] == 7);

  std::ofstream(dir / "other.json") << R"({"subcommand": "train"})";
  CHECK(gnosis_cli({"param-count", "--config", (dir / "other.json").string(), "--out", (dir / "o").string()}).code ==
        gnosis::cli::kExitValidation);
}

TEST_CASE("full-size preset parameter counts fall inside their bands") {
  ScratchDir dir("cli_params");
  const auto r = gnosis_cli({"param-count", "--out", dir.path().string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = json::parse(r.out);
  CHECK(j["preset"] == "paper");
  for (const char* g : {"hidden", "attn", "total"}) CHECK(j["bands"][g]["within"] == true);
}

TEST_CASE("GNOSIS_OUT is used when --out is absent") {
  ScratchDir dir("cli_env");
  const auto target = (dir / "from_env").string();
  ::setenv("GNOSIS_OUT", target.c_str(), 1);
  const auto r = gnosis_cli({"param-count"});
  ::unsetenv("GNOSIS_OUT");
  CHECK(r.code == 0);
  CHECK(fs::exists(fs::path(target) / "param_count.json"));
  CHECK(fs::exists(fs::path(target) / gnosis::cli::kEffectiveConfigFile));
}

TEST_CASE("inspect-trace prints one row per map") {
  Pipeline p;
  const auto r = gnosis_cli({"inspect-trace", (p.data / "syn_000000.gtrc").string(), "--out", (p.root / "i").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream is(r.out);
  std::size_t lines = 0;
  for (std::string l; std::getline(is, l);) ++lines;
  CHECK(lines == 1 + 4 * 4);
  CHECK(fs::exists(p.root / "i" / "syn_000000_header.json"));
}

TEST_CASE("generate, train, evaluate") {
  Pipeline p;
  CHECK(fs::exists(p.data / "manifest.json"));
  CHECK(fs::exists(p.data / "oracle.json"));
  CHECK(fs::exists(p.run / "train_log.jsonl"));

  const auto ev_dir = p.root / "ev";
  const auto ev = gnosis_cli({"eval", "--checkpoint", p.checkpoint(), "--traces", p.data.string(), "--out",
                              ev_dir.string(), "--descriptors"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const auto report = read_json(ev_dir / "eval_report.json");
  for (const char* k : {"auroc", "aupr_c", "aupr_e", "bss", "ece"}) {
    INFO(k);
    CHECK(report.contains(k));
    CHECK(report[k].is_number());
  }
  CHECK(report["n"] == 48);
  CHECK(fs::exists(ev_dir / "eval_report.csv"));
  CHECK(fs::exists(ev_dir / "eval_report_reliability.csv"));
  CHECK(fs::exists(ev_dir / "descriptors.csv"));

  SUBCASE("rerunning from the echoed configuration repeats the report") {
    const auto again = p.root / "ev_again";
    const auto r = gnosis_cli({"eval", "--config", (ev_dir / gnosis::cli::kEffectiveConfigFile).string(), "--out",
                               again.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(again / "eval_report.json") == slurp(ev_dir / "eval_report.json"));
  }

  SUBCASE("scoring then evaluating the score file matches") {
    const auto sc = p.root / "sc";
    REQUIRE(gnosis_cli({"score", "--checkpoint", p.checkpoint(), "--traces", p.data.string(), "--out", sc.string()})
                .code == 0);
    const auto r = gnosis_cli({"eval", "--scores", (sc / "scores.csv").string(), "--traces", p.data.string(), "--out",
                               (p.root / "ev_scores").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto from_scores = read_json(p.root / "ev_scores" / "eval_report.json");
    for (const char* k : {"auroc", "aupr_c", "aupr_e", "bss", "ece", "brier"}) {
      INFO(k);
      CHECK(from_scores[k].get<double>() == doctest::Approx(report[k].get<double>()).epsilon(1e-12));
    }
  }

  SUBCASE("the early sweep ends with the full-generation row") {
    const auto early = p.root / "early";
    const auto r = gnosis_cli({"eval-early", "--checkpoint", p.checkpoint(), "--traces", p.data.string(), "--out",
                               early.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream is(slurp(early / "early_sweep.csv"));
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "fraction,auroc,aupr_c,aupr_e,bss,ece");
    const auto sweep = read_json(early / "early_sweep.json");
    const auto& last = sweep.back();
    CHECK(last["prefix_fraction"] == 1.0);
    for (const char* k : {"auroc", "aupr_c", "aupr_e", "bss", "ece", "brier"}) {
      INFO(k);
      CHECK(last[k] == report[k]);
    }
  }

  SUBCASE("resume continues the run") {
    const auto r = gnosis_cli({"train", "--traces", p.data.string(), "--resume", p.checkpoint(), "--out",
                               (p.root / "resumed").string(), "--set", "train.epochs=2", "--set",
                               "train.batch_size=8", "-q"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(p.root / "resumed" / "final.gnsw"));
    const auto mismatch = gnosis_cli({"train", "--traces", p.data.string(), "--resume", p.checkpoint(), "--out",
                                      (p.root / "resumed2").string(), "--set", "train.epochs=2", "-q"});
    CHECK(mismatch.code == gnosis::cli::kExitValidation);
    CHECK(mismatch.err.find("batch_size") != std::string::npos);
  }
}

TEST_CASE("sibling family and cross-width evaluation") {
  ScratchDir dir("cli_family");
  auto g = gnosis_cli(cat({"gen-synthetic", "--n", "24", "--family", "32,48", "--out", dir.path().string(), "-q"},
                          kSmallSet));
  REQUIRE_MESSAGE(g.code == 0, g.err);
  CHECK(fs::exists(dir / "d32" / "manifest.json"));
  CHECK(fs::exists(dir / "d48" / "manifest.json"));
  REQUIRE(gnosis_cli({"train", "--traces", (dir / "d32").string(), "--out", (dir / "run").string(), "--set",
                      "train.epochs=1", "--set", "train.batch_size=8", "-q"})
              .code == 0);
  const auto ckpt = (dir / "run" / "final.gnsw").string();
  const auto without = gnosis_cli({"eval-sibling", "--checkpoint", ckpt, "--traces", (dir / "d48").string(), "--out",
                                   (dir / "s0").string()});
  CHECK(without.code == gnosis::cli::kExitValidation);
  const auto with = gnosis_cli({"eval-sibling", "--checkpoint", ckpt, "--traces", (dir / "d48").string(),
                                "--adapter-seed", "9", "--out", (dir / "s1").string()});
  REQUIRE_MESSAGE(with.code == 0, with.err);
  CHECK(read_json(dir / "s1" / "sibling_report.json")["n"] == 24);
}

TEST_CASE("grad-check passes on the desk model") {
  ScratchDir dir("cli_grad");
  const auto r = gnosis_cli(cat({"grad-check", "--per-tensor", "1", "--out", dir.path().string()}, kSmallSet));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(json::parse(r.out)["passed"] == true);
}
