// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "gnosis/ad/adam.hpp"
#include "gnosis/ad/ops.hpp"
#include "gnosis/binary_io.hpp"
#include "gnosis/checkpoint.hpp"
#include "gnosis/errors.hpp"
#include "gnosis/metrics.hpp"
#include "gnosis/parallel.hpp"

namespace gnosis::train {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr uint32_t kSplitStream = 0x5eed;
constexpr uint32_t kEpochStream = 0xe90c;

template <class V>
void take(const nlohmann::json& j, const char* key, V& out) {
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train.") + key + ": " + e.what());
  }
}

std::mt19937_64 rng_for(uint64_t seed, uint32_t stream, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), stream,
                    static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::size_t count_correct(const std::vector<trace::TraceEntry>& v) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [](const auto& e) { return e.header.label == trace::kLabelCorrect; }));
}

struct Cursor {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t step = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::optional<double> best_key;
  std::optional<std::size_t> best_epoch;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},
            {"batch", batch},
            {"step", step},
            {"loss_sum", loss_sum},
            {"loss_count", loss_count},
            {"best_key", best_key ? nlohmann::json(*best_key) : nlohmann::json(nullptr)},
            {"best_epoch", best_epoch ? nlohmann::json(*best_epoch) : nlohmann::json(nullptr)}};
  }
  static Cursor from_json(const nlohmann::json& j) {
    try {
      Cursor c;
      c.epoch = j.at("epoch").get<std::size_t>();
      c.batch = j.at("batch").get<std::size_t>();
      c.step = j.at("step").get<std::size_t>();
      c.loss_sum = j.at("loss_sum").get<double>();
      c.loss_count = j.at("loss_count").get<std::size_t>();
      if (!j.at("best_key").is_null()) c.best_key = j.at("best_key").get<double>();
      if (!j.at("best_epoch").is_null()) c.best_epoch = j.at("best_epoch").get<std::size_t>();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("checkpoint cursor: ") + e.what());
    }
  }
};

nlohmann::json epoch_json(const EpochRecord& r) {
  return {{"type", "epoch"},
          {"epoch", r.epoch},
          {"train_bce", r.train_bce},
          {"val_bce", r.val_bce},
          {"val_auroc", r.val_auroc ? nlohmann::json(*r.val_auroc) : nlohmann::json(nullptr)},
          {"seconds", r.seconds}};
}

double clamped_log_loss(double p, uint8_t y) {
  const double q = std::clamp(p, ad::kBceClamp, 1.0 - ad::kBceClamp);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

class Runner {
 public:
  Runner(model::GnosisModel<float>& model, ad::Adam<float>& adam, const Split& split, const TrainConfig& cfg,
         const fs::path& out)
      : model_(model), adam_(adam), split_(split), cfg_(cfg), out_(out) {}

  TrainLog run(Cursor cur, bool append) {
    const auto t0 = Clock::now();
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create " + out_.string() + ": " + ec.message());
    log_.open(out_ / "train_log.jsonl", append ? std::ios::app : std::ios::trunc);
    if (!log_) throw IoError("cannot write " + (out_ / "train_log.jsonl").string());

    const auto train_ex = prepare_examples(model_, split_.train);
    const auto val_ex = prepare_examples(model_, split_.val);
    const std::size_t n = train_ex.size(), B = cfg_.batch_size;
    const std::size_t n_batches = (n + B - 1) / B;
    const std::size_t P = model_.params().total_size();
    const auto mask = model_.trainable_mask();

    double w[2] = {1.0, 1.0};
    if (cfg_.prevalence_weighting) {
      const auto n1 = static_cast<double>(split_.train_correct());
      w[1] = static_cast<double>(n) / (2.0 * n1);
      w[0] = static_cast<double>(n) / (2.0 * (static_cast<double>(n) - n1));
    }

    TrainLog out;
    std::vector<float> grads(B * P);
    std::vector<double> losses(B);
    for (std::size_t e = cur.epoch; e < cfg_.epochs; ++e) {
      const auto te = Clock::now();
      auto rng = rng_for(cfg_.seed, kEpochStream, e);
      const auto order = permutation(n, rng);
      for (std::size_t b = (e == cur.epoch ? cur.batch : 0); b < n_batches; ++b) {
        const std::size_t begin = b * B, m = std::min(B, n - begin);
        const std::size_t step = cur.step + 1;
        auto at_step = [&] {
          return " at step " + std::to_string(step) + " (epoch " + std::to_string(e) + ", batch " + std::to_string(b) +
                 ")";
        };
        try {
          parallel_for(m, [&](std::size_t i) {
            const auto& ex = train_ex[order[begin + i]];
            std::span<float> sink(grads.data() + i * P, P);
            std::fill(sink.begin(), sink.end(), 0.0f);
            ad::Tape<float> tape;
            tape.set_grad_sink(sink);
            const auto r = model_.forward(tape, ex.x);
            const float y = ex.label;
            auto loss = ad::binary_cross_entropy(r.prob, std::span<const float>(&y, 1));
            tape.backward(loss);
            losses[i] = loss.item();
          });
        } catch (const NumericError& err) {
          throw NumericError(std::string(err.what()) + at_step());
        }
        auto& store = model_.params();
        store.zero_grads();
        double batch_loss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wi = w[train_ex[order[begin + i]].label] / static_cast<double>(m);
          store.accumulate_grads(std::span<const float>(grads.data() + i * P, P), static_cast<float>(wi));
          batch_loss += wi * losses[i];
        }
        if (!std::isfinite(batch_loss)) {
          throw NumericError("non-finite loss" + at_step());
        }
        try {
          adam_.step(store, mask);
        } catch (const NumericError& err) {
          throw NumericError(std::string(err.what()) + at_step());
        }
        cur.step = step;
        cur.batch = b + 1;
        for (std::size_t i = 0; i < m; ++i) cur.loss_sum += losses[i];
        cur.loss_count += m;
        out.steps.push_back({step, e, b, batch_loss});
        log_ << nlohmann::json{{"type", "step"}, {"step", step}, {"epoch", e}, {"batch", b}, {"loss", batch_loss}}.dump()
             << "\n";
        if (cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0) {
          char name[32];
          std::snprintf(name, sizeof name, "step_%06zu.gnsw", step);
          save(out_ / name, cur, true);
        }
      }

      EpochRecord rec;
      rec.epoch = e;
      rec.train_bce = cur.loss_count ? cur.loss_sum / static_cast<double>(cur.loss_count) : 0.0;
      validate(val_ex, rec);
      rec.seconds = std::chrono::duration<double>(Clock::now() - te).count();
      out.epochs.push_back(rec);
      log_ << epoch_json(rec).dump() << "\n";
      log_.flush();

      cur.epoch = e + 1;
      cur.batch = 0;
      cur.loss_sum = 0.0;
      cur.loss_count = 0;
      const double key = rec.val_auroc ? *rec.val_auroc : -rec.val_bce;
      if (!cur.best_key || key > *cur.best_key) {
        cur.best_key = key;
        cur.best_epoch = e;
        save(out_ / "best.gnsw", cur, false, &rec);
      }
      save(out_ / "final.gnsw", cur, true, &rec);
    }
    if (!fs::exists(out_ / "final.gnsw")) save(out_ / "final.gnsw", cur, true);

    out.best_epoch = cur.best_epoch;
    out.final_checkpoint = out_ / "final.gnsw";
    if (fs::exists(out_ / "best.gnsw")) out.best_checkpoint = out_ / "best.gnsw";
    out.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    write_summary(out, cur);
    return out;
  }

 private:
  void validate(const std::vector<Example>& val, EpochRecord& rec) const {
    std::vector<double> p(val.size());
    std::vector<uint8_t> y(val.size());
    parallel_for(val.size(), [&](std::size_t i) { p[i] = model_.score(val[i].x); });
    double bce = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      y[i] = val[i].label;
      bce += clamped_log_loss(p[i], y[i]);
    }
    rec.val_bce = bce / static_cast<double>(val.size());
    const auto pos = std::count(y.begin(), y.end(), uint8_t{1});
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(y.size())) rec.val_auroc = eval::auroc(p, y);
  }

  void save(const fs::path& path, const Cursor& cur, bool with_optimizer, const EpochRecord* rec = nullptr) const {
    nlohmann::json extra = {{"train_config", cfg_.to_json()},
                            {"step", cur.step},
                            {"n_train", split_.train.size()},
                            {"n_val", split_.val.size()}};
    if (rec != nullptr) extra["epoch_record"] = epoch_json(*rec);
    if (!with_optimizer) {
      model::save_checkpoint(path, model_, nullptr, extra);
      return;
    }
    model::OptimizerSnapshot snap;
    snap.adam = adam_.config();
    snap.steps = adam_.step_count();
    snap.m.assign(adam_.first_moment().begin(), adam_.first_moment().end());
    snap.v.assign(adam_.second_moment().begin(), adam_.second_moment().end());
    snap.cursor = cur.to_json();
    model::save_checkpoint(path, model_, &snap, extra);
  }

  void write_summary(const TrainLog& log, const Cursor& cur) const {
    const auto pc = model_.param_count();
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& r : log.epochs) epochs.push_back(epoch_json(r));
    const nlohmann::json j = {
        {"train_config", cfg_.to_json()},
        {"model_config", model_.config().to_json()},
        {"geometry", model_.geometry().to_json()},
        {"param_count", {{"hidden", pc.hidden}, {"attn", pc.attn}, {"fusion", pc.fusion}, {"total", pc.total}}},
        {"split",
         {{"n_train", split_.train.size()},
          {"n_val", split_.val.size()},
          {"train_correct", split_.train_correct()},
          {"val_correct", split_.val_correct()},
          {"excluded_unlabeled", split_.excluded_unlabeled}}},
        {"epochs", epochs},
        {"steps", cur.step},
        {"best_epoch", cur.best_epoch ? nlohmann::json(*cur.best_epoch) : nlohmann::json(nullptr)},
        {"final_checkpoint", log.final_checkpoint.string()},
        {"best_checkpoint", log.best_checkpoint.string()},
        {"wall_seconds", log.wall_seconds},
    };
    write_text(out_ / "train_summary.json", j.dump(2) + "\n");
  }

  model::GnosisModel<float>& model_;
  ad::Adam<float>& adam_;
  const Split& split_;
  const TrainConfig& cfg_;
  fs::path out_;
  std::ofstream log_;
};

void check_model(const model::GnosisModel<float>& model, const TrainConfig& cfg) {
  if (model.config().ablation != cfg.ablation) {
    throw ConfigError("train.ablation is '" + std::string(model::ablation_name(cfg.ablation)) +
                      "' but the model was built for '" + std::string(model::ablation_name(model.config().ablation)) +
                      "'");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be nonnegative");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("train.eval_fraction must be in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"seed", seed},
          {"eval_fraction", eval_fraction},
          {"ablation", std::string(model::ablation_name(ablation))},
          {"checkpoint_every", checkpoint_every},
          {"prevalence_weighting", prevalence_weighting}};
}

void TrainConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    const char* k = key.c_str();
    if (key == "epochs") take(j, k, epochs);
    else if (key == "learning_rate") take(j, k, learning_rate);
    else if (key == "batch_size") take(j, k, batch_size);
    else if (key == "seed") take(j, k, seed);
    else if (key == "eval_fraction") take(j, k, eval_fraction);
    else if (key == "checkpoint_every") take(j, k, checkpoint_every);
    else if (key == "prevalence_weighting") take(j, k, prevalence_weighting);
    else if (key == "ablation") {
      std::string s;
      take(j, k, s);
      ablation = model::parse_ablation(s);
    } else {
      throw ConfigError("unknown key 'train." + key + "'");
    }
  }
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.merge_json(j);
  c.validate();
  return c;
}

std::size_t Split::train_correct() const { return count_correct(train); }
std::size_t Split::val_correct() const { return count_correct(val); }

Split build_dataset(const trace::TraceSet& ts, uint64_t seed, double eval_fraction) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("train.eval_fraction must be in (0, 1)");
  Split s;
  s.excluded_unlabeled = ts.excluded_unlabeled;
  std::vector<const trace::TraceEntry*> labeled;
  for (const auto& e : ts.entries) {
    if (e.header.labeled()) labeled.push_back(&e);
    else ++s.excluded_unlabeled;
  }
  const std::size_t n = labeled.size();
  if (n == 0) throw DegenerateError("no labeled traces in " + ts.directory.string());
  if (n < 2) throw DegenerateError("need at least 2 labeled traces to split, found 1");
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n))), 1, n - 1);
  auto rng = rng_for(seed, kSplitStream, 0);
  auto perm = permutation(n, rng);
  std::vector<uint8_t> is_val(n, 0);
  for (std::size_t i = 0; i < n_val; ++i) is_val[perm[i]] = 1;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? s.val : s.train).push_back(*labeled[i]);
  const std::size_t c = s.train_correct();
  if (c == 0 || c == s.train.size()) {
    throw DegenerateError(std::string("training split has only ") + (c == 0 ? "incorrect" : "correct") +
                          " examples (" + std::to_string(s.train.size()) + " traces)");
  }
  return s;
}

std::vector<Example> prepare_examples(const model::GnosisModel<float>& model,
                                      std::span<const trace::TraceEntry> entries) {
  std::vector<Example> out(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto t = trace::read_trace(entries[i].path);
    out[i] = {entries[i].id, model.prepare(t), t.header.label};
  });
  return out;
}

TrainLog train(model::GnosisModel<float>& model, const Split& split, const TrainConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  check_model(model, cfg);
  ad::Adam<float> adam(model.params().total_size(), ad::AdamConfig{.lr = cfg.learning_rate});
  Runner runner(model, adam, split, cfg, out_dir);
  return runner.run(Cursor{}, false);
}

Resumed resume(const fs::path& checkpoint, const Split& split, const TrainConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  auto loaded = model::load_checkpoint(checkpoint);
  if (!loaded.optimizer) throw ConfigError("checkpoint " + checkpoint.string() + " has no optimizer state to resume");
  if (!loaded.extra.contains("train_config")) throw ConfigError("checkpoint has no training configuration");
  TrainConfig prev;
  prev.merge_json(loaded.extra["train_config"]);
  auto mismatch = [&](const char* field, const std::string& a, const std::string& b) {
    if (a != b) {
      throw ConfigError(std::string("resume: train.") + field + " differs (checkpoint " + a + ", requested " + b + ")");
    }
  };
  mismatch("batch_size", std::to_string(prev.batch_size), std::to_string(cfg.batch_size));
  mismatch("seed", std::to_string(prev.seed), std::to_string(cfg.seed));
  mismatch("learning_rate", nlohmann::json(prev.learning_rate).dump(), nlohmann::json(cfg.learning_rate).dump());
  mismatch("eval_fraction", nlohmann::json(prev.eval_fraction).dump(), nlohmann::json(cfg.eval_fraction).dump());
  mismatch("ablation", std::string(model::ablation_name(prev.ablation)), std::string(model::ablation_name(cfg.ablation)));
  mismatch("prevalence_weighting", prev.prevalence_weighting ? "true" : "false",
           cfg.prevalence_weighting ? "true" : "false");
  if (loaded.extra.value("n_train", std::size_t{0}) != split.train.size() ||
      loaded.extra.value("n_val", std::size_t{0}) != split.val.size()) {
    throw ConfigError("resume: the data split differs from the checkpoint's");
  }
  const auto cur = Cursor::from_json(loaded.optimizer->cursor);
  if (cur.epoch > cfg.epochs) {
    throw ConfigError("resume: train.epochs " + std::to_string(cfg.epochs) + " is below the checkpoint's epoch " +
                      std::to_string(cur.epoch));
  }
  check_model(loaded.model, cfg);
  Resumed r{std::move(loaded.model), {}};
  ad::AdamConfig acfg = loaded.optimizer->adam;
  acfg.lr = cfg.learning_rate;
  ad::Adam<float> adam(r.model.params().total_size(), acfg);
  adam.restore(loaded.optimizer->steps, std::move(loaded.optimizer->m), std::move(loaded.optimizer->v));
  Runner runner(r.model, adam, split, cfg, out_dir);
  r.log = runner.run(cur, true);
  return r;
}

}  // namespace gnosis::train
