// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient verification in double precision.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gnosis/ad/params.hpp"
#include "gnosis/ad/tensor.hpp"

namespace gnosis::ad {

inline constexpr double kFiniteDifferenceStep = 1e-5;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // coordinate with the largest relative error
  double tolerance = 0.0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric) noexcept;

// f maps a leaf x (built on the given tape) to a scalar.
using ScalarFn = std::function<Tensor<double>(Tape<double>&, Tensor<double>)>;

// Checks every coordinate of x. Non-scalar output raises DomainError.
GradCheckReport grad_check(const ScalarFn& f, const Shape& shape, const std::vector<double>& x, double tolerance,
                           double step = kFiniteDifferenceStep);

// f builds a scalar loss from the parameters of `store`.
using LossFn = std::function<Tensor<double>(Tape<double>&)>;

// Checks up to `per_tensor` coordinates of every parameter tensor (chosen
// with `seed`; 0 checks all of them).
GradCheckReport grad_check_params(ParamStore<double>& store, const LossFn& f, double tolerance,
                                  std::size_t per_tensor, uint64_t seed, double step = kFiniteDifferenceStep);

}  // namespace gnosis::ad
