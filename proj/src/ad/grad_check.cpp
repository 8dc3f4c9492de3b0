// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gnosis/errors.hpp"

namespace gnosis::ad {

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void require_scalar(const Tensor<double>& y) {
  if (!y.defined() || y.numel() != 1) {
    throw DomainError("grad_check: function must return a scalar, got shape " +
                      (y.defined() ? to_string(y.shape()) : std::string("<undefined>")));
  }
}

void note(GradCheckReport& r, double a, double n, const std::string& where) {
  const double rel = relative_error(a, n);
  r.max_abs_error = std::max(r.max_abs_error, std::abs(a - n));
  if (rel > r.max_rel_error || r.checked == 0) {
    r.max_rel_error = rel;
    r.worst = where;
  }
  ++r.checked;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Shape& shape, const std::vector<double>& x, double tolerance,
                           double step) {
  auto eval = [&](const std::vector<double>& at) {
    Tape<double> tape;
    auto y = f(tape, tape.variable(shape, at));
    require_scalar(y);
    return y.item();
  };
  Tape<double> tape;
  auto leaf = tape.variable(shape, x);
  auto y = f(tape, leaf);
  require_scalar(y);
  tape.backward(y);
  const auto analytic = std::vector<double>(leaf.grad().begin(), leaf.grad().end());

  GradCheckReport r;
  r.tolerance = tolerance;
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double fp = eval(xp);
    xp[i] = x[i] - step;
    const double fm = eval(xp);
    xp[i] = x[i];
    note(r, analytic[i], (fp - fm) / (2 * step), "x[" + std::to_string(i) + "]");
  }
  r.passed = r.max_rel_error < tolerance;
  return r;
}

GradCheckReport grad_check_params(ParamStore<double>& store, const LossFn& f, double tolerance,
                                  std::size_t per_tensor, uint64_t seed, double step) {
  auto eval = [&]() {
    Tape<double> tape;
    auto y = f(tape);
    require_scalar(y);
    return y.item();
  };
  std::vector<double> grads(store.total_size(), 0.0);
  {
    Tape<double> tape;
    tape.set_grad_sink(grads);
    auto y = f(tape);
    require_scalar(y);
    tape.backward(y);
  }

  GradCheckReport r;
  r.tolerance = tolerance;
  std::mt19937_64 rng(seed);
  auto values = store.values();
  for (std::size_t p = 0; p < store.count(); ++p) {
    const auto& info = store.info(p);
    std::vector<std::size_t> idx(info.size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (per_tensor != 0 && per_tensor < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      double& v = values[info.offset + i];
      const double keep = v;
      v = keep + step;
      const double fp = eval();
      v = keep - step;
      const double fm = eval();
      v = keep;
      note(r, grads[info.offset + i], (fp - fm) / (2 * step), info.name + "[" + std::to_string(i) + "]");
    }
  }
  r.passed = r.max_rel_error < tolerance;
  return r;
}

}  // namespace gnosis::ad
