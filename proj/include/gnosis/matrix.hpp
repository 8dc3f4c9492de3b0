// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gnosis {

// Dense row-major matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values)
      : rows(r), cols(c), data(std::move(values)) {}

  T& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

}  // namespace gnosis
