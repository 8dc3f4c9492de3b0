// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense inner loops used by the autodiff ops. `*_serial` variants are the
// reference; the OpenMP variants split work over output rows only, so
// every output element is reduced in the same order and the results are
// bitwise identical to the serial ones.

#pragma once

#include <cstddef>

namespace gnosis::ad::kernels {

// C[M,N] (+)= A[M,K] * B[K,N]
template <class T>
void gemm_nn_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C[M,N] (+)= A[M,K] * B[N,K]^T
template <class T>
void gemm_nt_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <class T>
void gemm_tn_serial(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// Fixed-order dot product with eight partial sums.
template <class T>
T dot(const T* a, const T* b, std::size_t n) noexcept;

// Work (m*k*n) above which the OpenMP variants fork; below it they run the
// serial loop. Nested calls from inside a parallel region never fork.
inline constexpr std::size_t kParallelWork = std::size_t{1} << 21;

}  // namespace gnosis::ad::kernels
