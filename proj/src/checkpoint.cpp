// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/checkpoint.hpp"

#include <string>

#include "gnosis/binary_io.hpp"
#include "gnosis/errors.hpp"

namespace gnosis::model {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'S', 'W'};

void put_json(io::ByteWriter& w, const nlohmann::json& j) {
  const std::string s = j.dump();
  w.u32(static_cast<uint32_t>(s.size()));
  w.bytes(s);
}

nlohmann::json get_json(io::ByteReader& r) {
  const uint32_t n = r.u32();
  const std::string s = r.string(n);
  try {
    return nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta", std::string("checkpoint JSON block: ") + e.what());
  }
}

}  // namespace

std::vector<uint8_t> encode_checkpoint(const GnosisModel<float>& model, const OptimizerSnapshot* optimizer,
                                       const nlohmann::json& extra) {
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  put_json(w, {{"model", model.config().to_json()}, {"geometry", model.geometry().to_json()}, {"extra", extra}});
  const auto& store = model.params();
  w.u32(static_cast<uint32_t>(store.count()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto& info = store.info(i);
    w.u32(static_cast<uint32_t>(info.name.size()));
    w.bytes(info.name);
    w.u32(static_cast<uint32_t>(info.shape.size()));
    for (auto d : info.shape) w.u32(static_cast<uint32_t>(d));
    w.f32s(store.values(i));
  }
  w.u8(optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->m.size() != store.total_size() || optimizer->v.size() != store.total_size()) {
      throw ShapeError("checkpoint: optimizer moments do not match the parameter layout");
    }
    put_json(w, {{"lr", optimizer->adam.lr},
                 {"beta1", optimizer->adam.beta1},
                 {"beta2", optimizer->adam.beta2},
                 {"eps", optimizer->adam.eps},
                 {"steps", optimizer->steps},
                 {"cursor", optimizer->cursor}});
    w.u64(optimizer->m.size());
    w.f32s(optimizer->m);
    w.f32s(optimizer->v);
  }
  w.u32(io::crc32(w.data()));
  return std::move(w).take();
}

LoadedCheckpoint decode_checkpoint(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "GNSW") {
    throw FormatError("magic", "not a GNSW checkpoint");
  }
  const auto body = bytes.first(bytes.size() - 4);
  io::ByteReader tail(bytes.last(4));
  if (tail.u32() != io::crc32(body)) throw FormatError("checksum", "checkpoint CRC32 mismatch");

  io::ByteReader r(body);
  r.skip(4);
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("version", "unsupported checkpoint version " + std::to_string(version));
  }
  const auto head = get_json(r);
  if (!head.contains("model") || !head.contains("geometry")) throw FormatError("meta", "checkpoint lacks model config");
  LoadedCheckpoint out{GnosisModel<float>(ModelConfig::from_json(head.at("model")),
                                          ModelGeometry::from_json(head.at("geometry"))),
                       std::nullopt, head.value("extra", nlohmann::json::object())};

  auto& store = out.model.params();
  const uint32_t count = r.u32();
  if (count != store.count()) {
    throw FormatError("dimension", "checkpoint has " + std::to_string(count) + " tensors, config implies " +
                                       std::to_string(store.count()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto& info = store.info(i);
    const std::string name = r.string(r.u32());
    if (name != info.name) throw FormatError("dimension", "tensor " + std::to_string(i) + " is '" + name +
                                                              "', expected '" + info.name + "'");
    ad::Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (shape != info.shape) {
      throw FormatError("dimension", "tensor '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                                         ad::to_string(info.shape));
    }
    r.f32s(store.values(i));
  }
  if (r.u8() != 0) {
    OptimizerSnapshot opt;
    const auto j = get_json(r);
    try {
      opt.adam = {j.at("lr").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
                  j.at("eps").get<double>()};
      opt.steps = j.at("steps").get<uint64_t>();
      opt.cursor = j.value("cursor", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("meta", std::string("checkpoint optimizer block: ") + e.what());
    }
    const uint64_t n = r.u64();
    if (n != store.total_size()) throw FormatError("dimension", "optimizer moments do not match the parameters");
    opt.m.resize(n);
    opt.v.resize(n);
    r.f32s(opt.m);
    r.f32s(opt.v);
    out.optimizer = std::move(opt);
  }
  if (r.remaining() != 0) throw FormatError("size", "trailing bytes after checkpoint payload");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const GnosisModel<float>& model,
                     const OptimizerSnapshot* optimizer, const nlohmann::json& extra) {
  io::write_file_atomic(path, encode_checkpoint(model, optimizer, extra));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace gnosis::model
