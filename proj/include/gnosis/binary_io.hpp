// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnosis/errors.hpp"

namespace gnosis::io {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <class U>
constexpr U byteswap_if_big(U v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    U out{};
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  } else {
    return v;
  }
}

uint32_t crc32(std::span<const uint8_t> bytes) noexcept;

// Append-only little-endian encoder.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { put(byteswap_if_big(v)); }
  void u32(uint32_t v) { put(byteswap_if_big(v)); }
  void u64(uint64_t v) { put(byteswap_if_big(v)); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f32s(std::span<const float> vs) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const uint8_t*>(vs.data());
      buf_.insert(buf_.end(), p, p + vs.size_bytes());
    } else {
      for (float v : vs) f32(v);
    }
  }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }
  // Overwrite a previously reserved u32 slot.
  void patch_u32(std::size_t offset, uint32_t v) {
    v = byteswap_if_big(v);
    std::memcpy(buf_.data() + offset, &v, sizeof v);
  }

  std::size_t size() const noexcept { return buf_.size(); }
  const std::vector<uint8_t>& data() const noexcept { return buf_; }
  std::vector<uint8_t> take() && { return std::move(buf_); }

 private:
  template <class U>
  void put(U v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(U));
  }
  std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian decoder; overruns raise FormatError("size").
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t u8() { return get<uint8_t>(); }
  uint16_t u16() { return byteswap_if_big(get<uint16_t>()); }
  uint32_t u32() { return byteswap_if_big(get<uint32_t>()); }
  uint64_t u64() { return byteswap_if_big(get<uint64_t>()); }
  float f32() { return std::bit_cast<float>(u32()); }
  void f32s(std::span<float> out) {
    need(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (float& v : out) v = f32();
    }
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("size", "truncated input: need " + std::to_string(n) +
                                    " bytes at offset " + std::to_string(pos_) +
                                    ", have " + std::to_string(bytes_.size() - pos_));
    }
  }
  template <class U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::span<const uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace gnosis::io
