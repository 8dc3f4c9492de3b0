// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "gnosis/ad/tensor.hpp"

namespace gnosis::ad {

// Parameters are grouped so that ablations can freeze a whole stream.
enum class ParamGroup : uint8_t { kHidden = 0, kAttention = 1, kFusion = 2 };

const char* group_name(ParamGroup g) noexcept;

struct ParamInfo {
  std::string name;  // hierarchical, e.g. "hidden.sab0.attn.wq"
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamGroup group = ParamGroup::kHidden;
};

// All parameters of a model in one flat buffer. Values and gradients share
// the same layout, which also serves as the Adam moment layout.
template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape, ParamGroup group);

  std::size_t count() const noexcept { return infos_.size(); }
  std::size_t total_size() const noexcept { return values_.size(); }
  const ParamInfo& info(std::size_t i) const { return infos_.at(i); }
  const std::vector<ParamInfo>& infos() const noexcept { return infos_; }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::span<T> values(std::size_t i) { return std::span<T>(values_).subspan(infos_[i].offset, infos_[i].size); }
  std::span<const T> values(std::size_t i) const {
    return std::span<const T>(values_).subspan(infos_[i].offset, infos_[i].size);
  }

  std::span<T> grads() noexcept { return grads_; }
  std::span<const T> grads() const noexcept { return grads_; }
  std::span<const T> grads(std::size_t i) const {
    return std::span<const T>(grads_).subspan(infos_[i].offset, infos_[i].size);
  }

  // Gradients count as populated once accumulate_grads() has run since the
  // last zero_grads().
  void zero_grads();
  void accumulate_grads(std::span<const T> g, T scale = T(1));
  bool has_grads() const noexcept { return has_grads_; }

  std::size_t group_size(ParamGroup g) const;
  // Per-group flag vector over the flat buffer.
  std::vector<uint8_t> group_mask(std::span<const ParamGroup> groups) const;

  template <class U>
  void copy_values_from(const ParamStore<U>& other);

 private:
  std::vector<ParamInfo> infos_;
  std::map<std::string, std::size_t> by_name_;
  std::vector<T> values_;
  std::vector<T> grads_;
  bool has_grads_ = false;
};

template <class T>
template <class U>
void ParamStore<T>::copy_values_from(const ParamStore<U>& other) {
  if (other.total_size() != total_size()) throw std::invalid_argument("ParamStore layout mismatch");
  auto src = other.values();
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = static_cast<T>(src[i]);
}

}  // namespace gnosis::ad
