// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generation traces and the GTRC v1 container.
//
// Layout (little-endian):
//   [0,4)   magic "GTRC"
//   [4,8)   u32 version (= 1)
//   [8,12)  u32 CRC32 of header bytes [12,64)
//   [12,16) u32 S          [16,20) u32 S_x        [20,24) u32 D
//   [24,26) u16 L_sel      [26,28) u16 H          [28,30) u16 k
//   [30]    u8 label       [31,64) reserved, zero
//   f32 hidden [S x D] row-major
//   f32 attention [L_sel x H x k x k] in (layer, head, row, col) order
//   u32 meta_len, meta_len bytes of UTF-8 JSON
//   u32 CRC32 of bytes [64, end of meta)

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gnosis::trace {

inline constexpr char kMagic[4] = {'G', 'T', 'R', 'C'};
inline constexpr uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;

inline constexpr uint8_t kLabelIncorrect = 0;
inline constexpr uint8_t kLabelCorrect = 1;
inline constexpr uint8_t kLabelUnlabeled = 255;

struct TraceHeader {
  uint32_t seq_len = 0;     // S = S_x + S_y
  uint32_t prompt_len = 0;  // S_x
  uint32_t hidden_dim = 0;  // D
  uint16_t num_layers = 0;  // L_sel
  uint16_t num_heads = 0;   // H
  uint16_t grid = 0;        // k
  uint8_t label = kLabelUnlabeled;
  std::string backbone_tag;  // lives in meta on disk

  uint32_t response_len() const noexcept { return seq_len - prompt_len; }
  std::size_t hidden_count() const noexcept {
    return static_cast<std::size_t>(seq_len) * hidden_dim;
  }
  std::size_t num_maps() const noexcept {
    return static_cast<std::size_t>(num_layers) * num_heads;
  }
  std::size_t attention_count() const noexcept {
    return num_maps() * grid * grid;
  }
  bool labeled() const noexcept { return label == kLabelCorrect || label == kLabelIncorrect; }

  // Throws ValidationError on the first violated invariant.
  void validate() const;
};

// The part of the header that must agree across a trace set.
struct Geometry {
  uint32_t hidden_dim = 0;
  uint16_t num_layers = 0;
  uint16_t num_heads = 0;
  uint16_t grid = 0;

  static Geometry of(const TraceHeader& h) noexcept {
    return {h.hidden_dim, h.num_layers, h.num_heads, h.grid};
  }
  bool operator==(const Geometry&) const = default;
  std::string describe() const;
};

struct GenerationTrace {
  TraceHeader header;
  std::vector<float> hidden;     // [S x D]
  std::vector<float> attention;  // [L_sel x H x k x k]
  nlohmann::json meta = nlohmann::json::object();

  std::span<const float> map(std::size_t layer, std::size_t head) const;
  std::optional<double> prefix_fraction() const;
  std::string prompt_id() const;

  // Checks dimensions, finiteness, label, and attention mass.
  void validate() const;
};

bool bitwise_equal(const GenerationTrace& a, const GenerationTrace& b);

std::size_t encoded_size(const TraceHeader& header, std::size_t meta_len) noexcept;

std::vector<uint8_t> encode_trace(const GenerationTrace& trace);
GenerationTrace decode_trace(std::span<const uint8_t> bytes);

// Parses exactly kHeaderBytes from the stream and nothing more.
TraceHeader read_header(std::istream& in);
TraceHeader decode_header(std::span<const uint8_t> bytes);

void write_trace(const GenerationTrace& trace, const std::filesystem::path& destination);
GenerationTrace read_trace(const std::filesystem::path& source);

// ---------------------------------------------------------------------------
// Trace sets

enum class LabelFilter { kAny, kLabeledOnly };

// Prefix payloads are sibling files named "<id>.pNNNN.gtrc", where NNNN is the
// prefix fraction in thousandths.
int fraction_key(double fraction);
std::filesystem::path prefix_path(const std::filesystem::path& full_trace_path, double fraction);

struct TraceEntry {
  std::string id;
  std::filesystem::path path;
  TraceHeader header;
  std::map<int, std::filesystem::path> prefixes;  // fraction_key -> file
};

struct RejectedFile {
  std::filesystem::path path;
  std::string reason;
};

struct TraceSet {
  std::filesystem::path directory;
  std::vector<TraceEntry> entries;
  Geometry geometry;
  std::size_t excluded_unlabeled = 0;
  std::vector<RejectedFile> rejected;

  std::size_t size() const noexcept { return entries.size(); }
  std::vector<uint8_t> labels() const;
};

// Scans *.gtrc files in lexicographic path order reading headers only.
// Unparseable files are listed in `rejected`; mixed geometry raises
// ValidationError naming every group.
TraceSet scan_traceset(const std::filesystem::path& directory,
                       LabelFilter filter = LabelFilter::kAny);

}  // namespace gnosis::trace
