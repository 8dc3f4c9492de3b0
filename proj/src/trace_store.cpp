// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/trace_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <regex>
#include <sstream>

#include "gnosis/binary_io.hpp"
#include "gnosis/errors.hpp"

namespace gnosis::trace {

namespace fs = std::filesystem;

void TraceHeader::validate() const {
  if (seq_len < 1) throw ValidationError("header: S must be >= 1");
  if (prompt_len >= seq_len) {
    throw ValidationError("header: S_x (" + std::to_string(prompt_len) + ") must be < S (" +
                          std::to_string(seq_len) + ")");
  }
  if (hidden_dim < 1) throw ValidationError("header: D must be >= 1");
  if (num_layers < 1) throw ValidationError("header: L_sel must be >= 1");
  if (num_heads < 1) throw ValidationError("header: H must be >= 1");
  if (grid < 2) throw ValidationError("header: k must be >= 2");
  if (label != kLabelIncorrect && label != kLabelCorrect && label != kLabelUnlabeled) {
    throw ValidationError("header: invalid label " + std::to_string(label));
  }
}

std::string Geometry::describe() const {
  std::ostringstream os;
  os << "(D=" << hidden_dim << ", L_sel=" << num_layers << ", H=" << num_heads << ", k=" << grid
     << ")";
  return os.str();
}

std::span<const float> GenerationTrace::map(std::size_t layer, std::size_t head) const {
  const std::size_t kk = static_cast<std::size_t>(header.grid) * header.grid;
  return std::span<const float>(attention).subspan((layer * header.num_heads + head) * kk, kk);
}

std::optional<double> GenerationTrace::prefix_fraction() const {
  if (meta.is_object() && meta.contains("prefix_fraction") && meta["prefix_fraction"].is_number()) {
    return meta["prefix_fraction"].get<double>();
  }
  return std::nullopt;
}

std::string GenerationTrace::prompt_id() const {
  if (meta.is_object() && meta.contains("prompt_id") && meta["prompt_id"].is_string()) {
    return meta["prompt_id"].get<std::string>();
  }
  return {};
}

void GenerationTrace::validate() const {
  header.validate();
  if (hidden.size() != header.hidden_count()) {
    throw ValidationError("dimension: hidden has " + std::to_string(hidden.size()) +
                          " values, header implies " + std::to_string(header.hidden_count()));
  }
  if (attention.size() != header.attention_count()) {
    throw ValidationError("dimension: attention has " + std::to_string(attention.size()) +
                          " values, header implies " + std::to_string(header.attention_count()));
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (!std::isfinite(hidden[i])) {
      throw ValidationError("finiteness: hidden value " + std::to_string(i) + " is not finite");
    }
  }
  const std::size_t kk = static_cast<std::size_t>(header.grid) * header.grid;
  for (std::size_t m = 0; m < header.num_maps(); ++m) {
    double mass = 0.0;
    for (std::size_t i = 0; i < kk; ++i) {
      const float v = attention[m * kk + i];
      if (!std::isfinite(v)) {
        throw ValidationError("finiteness: attention map " + std::to_string(m) + " has non-finite entry");
      }
      if (v < 0.0f) {
        throw ValidationError("attention: map " + std::to_string(m) + " has a negative entry");
      }
      mass += v;
    }
    if (!(mass > 0.0)) {
      throw ValidationError("attention: map " + std::to_string(m) + " has zero total mass");
    }
  }
  if (!meta.is_object()) throw ValidationError("meta: must be a JSON object");
}

bool bitwise_equal(const GenerationTrace& a, const GenerationTrace& b) {
  const auto& ha = a.header;
  const auto& hb = b.header;
  if (ha.seq_len != hb.seq_len || ha.prompt_len != hb.prompt_len || ha.hidden_dim != hb.hidden_dim ||
      ha.num_layers != hb.num_layers || ha.num_heads != hb.num_heads || ha.grid != hb.grid ||
      ha.label != hb.label || ha.backbone_tag != hb.backbone_tag) {
    return false;
  }
  auto same_bits = [](const std::vector<float>& x, const std::vector<float>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  return same_bits(a.hidden, b.hidden) && same_bits(a.attention, b.attention) && a.meta == b.meta;
}

std::size_t encoded_size(const TraceHeader& h, std::size_t meta_len) noexcept {
  return kHeaderBytes + 4 * h.hidden_count() + 4 * h.attention_count() + 4 + meta_len + 4;
}

namespace {

std::string meta_text(const GenerationTrace& trace) {
  nlohmann::json meta = trace.meta.is_object() ? trace.meta : nlohmann::json::object();
  meta.erase("backbone_tag");
  if (!trace.header.backbone_tag.empty()) meta["backbone_tag"] = trace.header.backbone_tag;
  return meta.dump();
}

void encode_header(io::ByteWriter& w, const TraceHeader& h) {
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(0);  // crc placeholder
  w.u32(h.seq_len);
  w.u32(h.prompt_len);
  w.u32(h.hidden_dim);
  w.u16(h.num_layers);
  w.u16(h.num_heads);
  w.u16(h.grid);
  w.u8(h.label);
  w.zeros(kHeaderBytes - w.size());
  const auto crc = io::crc32(std::span<const uint8_t>(w.data()).subspan(12, kHeaderBytes - 12));
  w.patch_u32(8, crc);
}

}  // namespace

TraceHeader decode_header(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("size", "header needs " + std::to_string(kHeaderBytes) + " bytes, got " +
                                  std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("magic", "not a GTRC file");
  io::ByteReader r(bytes.first(kHeaderBytes));
  r.skip(4);
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("version", "unsupported GTRC version " + std::to_string(version));
  }
  const uint32_t stored_crc = r.u32();
  if (io::crc32(bytes.subspan(12, kHeaderBytes - 12)) != stored_crc) {
    throw FormatError("header_crc", "header checksum mismatch");
  }
  TraceHeader h;
  h.seq_len = r.u32();
  h.prompt_len = r.u32();
  h.hidden_dim = r.u32();
  h.num_layers = r.u16();
  h.num_heads = r.u16();
  h.grid = r.u16();
  h.label = r.u8();
  if (h.label != kLabelIncorrect && h.label != kLabelCorrect && h.label != kLabelUnlabeled) {
    throw FormatError("label", "invalid label byte " + std::to_string(h.label));
  }
  try {
    h.validate();
  } catch (const ValidationError& e) {
    throw FormatError("dimension", e.what());
  }
  return h;
}

TraceHeader read_header(std::istream& in) {
  std::array<uint8_t, kHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    throw FormatError("size", "truncated header");
  }
  return decode_header(buf);
}

std::vector<uint8_t> encode_trace(const GenerationTrace& trace) {
  trace.validate();
  const std::string meta = meta_text(trace);
  io::ByteWriter w;
  encode_header(w, trace.header);
  w.f32s(trace.hidden);
  w.f32s(trace.attention);
  w.u32(static_cast<uint32_t>(meta.size()));
  w.bytes(meta);
  const auto payload = std::span<const uint8_t>(w.data()).subspan(kHeaderBytes);
  w.u32(io::crc32(payload));
  return std::move(w).take();
}

GenerationTrace decode_trace(std::span<const uint8_t> bytes) {
  GenerationTrace t;
  t.header = decode_header(bytes);
  const auto& h = t.header;

  // The exact size is known once meta_len is read; check it before parsing.
  const std::size_t meta_len_at = kHeaderBytes + 4 * h.hidden_count() + 4 * h.attention_count();
  if (bytes.size() < meta_len_at + 8) {
    throw FormatError("size", "file too short for header dimensions");
  }
  io::ByteReader len_reader(bytes.subspan(meta_len_at, 4));
  const uint32_t meta_len = len_reader.u32();
  if (bytes.size() != encoded_size(h, meta_len)) {
    throw FormatError("size", "file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                                  std::to_string(encoded_size(h, meta_len)));
  }
  const std::size_t crc_at = bytes.size() - 4;
  io::ByteReader crc_reader(bytes.subspan(crc_at, 4));
  if (io::crc32(bytes.subspan(kHeaderBytes, crc_at - kHeaderBytes)) != crc_reader.u32()) {
    throw FormatError("checksum", "payload checksum mismatch");
  }

  io::ByteReader r(bytes.subspan(kHeaderBytes));
  t.hidden.resize(h.hidden_count());
  r.f32s(t.hidden);
  t.attention.resize(h.attention_count());
  r.f32s(t.attention);
  r.skip(4);
  const std::string meta = r.string(meta_len);
  try {
    t.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta", std::string("metadata is not valid JSON: ") + e.what());
  }
  if (!t.meta.is_object()) throw FormatError("meta", "metadata must be a JSON object");
  if (t.meta.contains("backbone_tag") && t.meta["backbone_tag"].is_string()) {
    // The tag lives in the header in memory; keep meta free of it so that
    // read(write(t)) reproduces t.
    t.header.backbone_tag = t.meta["backbone_tag"].get<std::string>();
    t.meta.erase("backbone_tag");
  }
  try {
    t.validate();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    throw FormatError(what.rfind("finiteness", 0) == 0 ? "finiteness" : "dimension", what);
  }
  return t;
}

void write_trace(const GenerationTrace& trace, const fs::path& destination) {
  const auto bytes = encode_trace(trace);
  io::write_file_atomic(destination, bytes);
}

GenerationTrace read_trace(const fs::path& source) {
  if (!fs::exists(source)) throw IoError("no such trace file: " + source.string());
  const auto bytes = io::read_file(source);
  return decode_trace(bytes);
}

// ---------------------------------------------------------------------------

int fraction_key(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("prefix fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  return static_cast<int>(std::lround(fraction * 1000.0));
}

fs::path prefix_path(const fs::path& full_trace_path, double fraction) {
  char tag[16];
  std::snprintf(tag, sizeof tag, ".p%04d.gtrc", fraction_key(fraction));
  auto p = full_trace_path;
  p.replace_extension();
  p += tag;
  return p;
}

std::vector<uint8_t> TraceSet::labels() const {
  std::vector<uint8_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.header.label);
  return out;
}

TraceSet scan_traceset(const fs::path& directory, LabelFilter filter) {
  if (!fs::is_directory(directory)) throw IoError("not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(directory)) {
    if (de.is_regular_file() && de.path().extension() == ".gtrc") files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());

  static const std::regex kPrefixStem(R"(^(.+)\.p(\d{4})$)");
  TraceSet ts;
  ts.directory = directory;
  std::vector<std::pair<std::string, std::pair<int, fs::path>>> prefix_files;
  std::map<std::string, std::vector<std::string>> by_geometry;

  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    std::smatch m;
    if (std::regex_match(stem, m, kPrefixStem)) {
      prefix_files.push_back({m[1].str(), {std::stoi(m[2].str()), path}});
      continue;
    }
    TraceHeader h;
    try {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw IoError("cannot open");
      h = read_header(in);
      const auto size = fs::file_size(path);
      if (size < encoded_size(h, 0)) throw FormatError("size", "file shorter than header implies");
    } catch (const Error& e) {
      ts.rejected.push_back({path, e.what()});
      continue;
    }
    if (filter == LabelFilter::kLabeledOnly && !h.labeled()) {
      ++ts.excluded_unlabeled;
      continue;
    }
    by_geometry[Geometry::of(h).describe()].push_back(path.filename().string());
    ts.entries.push_back({stem, path, h, {}});
  }

  if (ts.entries.empty()) {
    throw ValidationError("empty trace set: no usable GTRC files in " + directory.string() +
                          (ts.excluded_unlabeled ? " (" + std::to_string(ts.excluded_unlabeled) +
                                                       " unlabeled excluded)"
                                                 : std::string()));
  }
  if (by_geometry.size() > 1) {
    std::ostringstream os;
    os << "incompatible trace geometries in " << directory.string() << ":";
    for (const auto& [geom, names] : by_geometry) {
      os << " " << geom << " x" << names.size() << " [" << names.front();
      if (names.size() > 1) os << ", ...";
      os << "]";
    }
    throw ValidationError(os.str());
  }
  ts.geometry = Geometry::of(ts.entries.front().header);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ts.entries.size(); ++i) index[ts.entries[i].id] = i;
  for (const auto& [id, kp] : prefix_files) {
    auto it = index.find(id);
    if (it == index.end()) {
      // Prefixes of filtered-out traces are dropped with their parent.
      continue;
    }
    ts.entries[it->second].prefixes[kp.first] = kp.second;
  }
  return ts;
}

}  // namespace gnosis::trace
