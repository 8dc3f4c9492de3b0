// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/ad/kernels.hpp"

#include <algorithm>

#include <omp.h>

namespace gnosis::ad::kernels {

template <class T>
T dot(const T* a, const T* b, std::size_t n) noexcept {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

namespace {

template <class T>
void nn_rows(const T* a, const T* b, T* c, std::size_t r0, std::size_t r1, std::size_t k, std::size_t n,
             bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    T* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, T(0));
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class T>
void nt_rows(const T* a, const T* b, T* c, std::size_t r0, std::size_t r1, std::size_t k, std::size_t n,
             bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T v = dot(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

template <class T>
void tn_rows(const T* a, const T* b, T* c, std::size_t r0, std::size_t r1, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    T* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p * m + i];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

bool fork(std::size_t m, std::size_t k, std::size_t n) {
  return m * k * n >= kParallelWork && m > 1 && !omp_in_parallel() && omp_get_max_threads() > 1;
}

}  // namespace

template <class T>
void gemm_nn_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  nn_rows(a, b, c, 0, m, k, n, accumulate);
}

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!fork(m, k, n)) return nn_rows(a, b, c, 0, m, k, n, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    nn_rows(a, b, c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, k, n, accumulate);
  }
}

template <class T>
void gemm_nt_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  nt_rows(a, b, c, 0, m, k, n, accumulate);
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!fork(m, k, n)) return nt_rows(a, b, c, 0, m, k, n, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    nt_rows(a, b, c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, k, n, accumulate);
  }
}

template <class T>
void gemm_tn_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  tn_rows(a, b, c, 0, m, m, k, n, accumulate);
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!fork(m, k, n)) return tn_rows(a, b, c, 0, m, m, k, n, accumulate);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    tn_rows(a, b, c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, m, k, n, accumulate);
  }
}

#define GNOSIS_INSTANTIATE(T)                                                                          \
  template T dot<T>(const T*, const T*, std::size_t) noexcept;                                         \
  template void gemm_nn_serial<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);        \
  template void gemm_nt_serial<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);        \
  template void gemm_tn_serial<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);

GNOSIS_INSTANTIATE(float)
GNOSIS_INSTANTIATE(double)

#undef GNOSIS_INSTANTIATE

}  // namespace gnosis::ad::kernels
