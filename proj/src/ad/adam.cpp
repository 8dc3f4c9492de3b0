// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/ad/adam.hpp"

#include <cmath>

#include "gnosis/errors.hpp"

namespace gnosis::ad {

template <class T>
void Adam<T>::step(ParamStore<T>& params, std::span<const uint8_t> mask) {
  const std::size_t n = params.total_size();
  if (m_.size() != n) throw ShapeError("adam: moment buffers do not match the parameter layout");
  if (!mask.empty() && mask.size() != n) throw ShapeError("adam: mask does not match the parameter layout");
  auto active = [&](const ParamInfo& info) { return mask.empty() || mask[info.offset] != 0; };
  if (!params.has_grads()) {
    for (const auto& info : params.infos()) {
      if (active(info)) throw ValidationError("adam: no gradient for parameter '" + info.name + "'");
    }
    return;
  }
  auto g = params.grads();
  for (const auto& info : params.infos()) {
    if (!active(info)) continue;
    for (std::size_t i = info.offset; i < info.offset + info.size; ++i) {
      if (!std::isfinite(g[i])) throw NumericError("adam: non-finite gradient in parameter '" + info.name + "'");
    }
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(cfg_.lr / bc1);
  const T rbc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg_.eps);
  auto p = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    m_[i] = b1 * m_[i] + (T(1) - b1) * g[i];
    v_[i] = b2 * v_[i] + (T(1) - b2) * g[i] * g[i];
    p[i] -= step * m_[i] / (std::sqrt(v_[i]) * rbc2 + eps);
  }
}

template <class T>
void Adam<T>::restore(uint64_t steps, std::vector<T> m, std::vector<T> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("adam: restored moments have wrong size");
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace gnosis::ad
