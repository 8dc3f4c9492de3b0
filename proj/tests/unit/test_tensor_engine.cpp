// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <omp.h>

#include "gnosis/ad/adam.hpp"
#include "gnosis/ad/grad_check.hpp"
#include "gnosis/ad/kernels.hpp"
#include "gnosis/ad/ops.hpp"
#include "gnosis/errors.hpp"
#include "support/fixtures.hpp"
#include "support/primitive_cases.hpp"

using namespace gnosis;
using ad::Tape;
using ad::Tensor;

TEST_CASE("closed forms") {
  Tape<double> tape;
  CHECK(ad::sigmoid(tape.constant({1}, std::vector<double>{0.0})).item() == 0.5);
  const std::vector<double> y1 = {1.0};
  CHECK(ad::binary_cross_entropy(tape.constant({1}, std::vector<double>{0.5}), std::span<const double>(y1)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const auto s = ad::softmax(tape.constant({2, 5}, std::vector<double>(10, 3.7)));
  for (double v : s.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("BCE clamps saturated probabilities") {
  Tape<double> tape;
  const std::vector<double> y = {1.0, 0.0};
  const auto loss = ad::binary_cross_entropy(tape.constant({2}, std::vector<double>{0.0, 1.0}), std::span<const double>(y));
  CHECK(std::isfinite(loss.item()));
  CHECK(loss.item() == doctest::Approx(-std::log(ad::kBceClamp)).epsilon(1e-9));
}

TEST_CASE("every primitive passes the finite-difference check at three random points") {
  std::mt19937_64 rng(31);
  for (const auto& c : gnosis::testing::primitive_cases(32)) {
    for (int point = 0; point < 3; ++point) {
      const auto x = gnosis::testing::uniform_vector(rng, ad::numel(c.shape), c.lo, c.hi);
      const auto r = ad::grad_check(c.fn, c.shape, x, 1e-4);
      INFO(c.name << " point " << point << " worst " << r.worst << " rel " << r.max_rel_error);
      CHECK(r.passed);
      CHECK(r.checked == x.size());
    }
  }
}

TEST_CASE("grad_check: quadratic is exact and a broken backward fails") {
  const ad::ScalarFn squares = [](Tape<double>&, Tensor<double> x) { return ad::sum(ad::mul(x, x)); };
  const auto ok = ad::grad_check(squares, {5}, {0.3, -1.2, 2.0, 0.0, 0.7}, 1e-4);
  CHECK(ok.passed);
  CHECK(ok.max_rel_error < 1e-9);

  // square whose backward forgets the factor 2
  const ad::ScalarFn broken = [](Tape<double>& tape, Tensor<double> x) {
    std::vector<double> y(x.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.values()[i] * x.values()[i];
    auto* in = x.node();
    auto sq = tape.record("bad_square", x.shape(), std::move(y), {x}, [in](ad::Node<double>& out) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) in->grad[i] += out.grad[i] * in->value[i];
    });
    return ad::sum(sq);
  };
  const auto bad = ad::grad_check(broken, {3}, {0.5, -1.0, 2.0}, 1e-4);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error > 1e-4);

  const ad::ScalarFn vector_out = [](Tape<double>&, Tensor<double> x) { return ad::sigmoid(x); };
  CHECK_THROWS_AS(ad::grad_check(vector_out, {2}, {0.1, 0.2}, 1e-4), DomainError);
}

TEST_CASE("shape errors name both operands") {
  Tape<double> tape;
  auto a = tape.zeros({2, 3});
  auto b = tape.zeros({4, 5});
  try {
    ad::matmul(a, b);
    FAIL("mismatched matmul accepted");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, b), ShapeError);
  CHECK_THROWS_AS(ad::slice(a, 1, 2, 5), ShapeError);
}

TEST_CASE("checked mode names the op producing a non-finite value") {
  Tape<double> tape;
  auto x = tape.constant({2}, std::vector<double>{1.0, std::numeric_limits<double>::max()});
  try {
    ad::scale(x, 10.0);
    FAIL("overflow not detected");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
  tape.checked = false;
  CHECK_NOTHROW(ad::scale(x, 10.0));
}

TEST_CASE("parameters accumulate into the grad sink") {
  ad::ParamStore<double> store;
  store.add("a.w", {2}, ad::ParamGroup::kHidden);
  store.add("b.w", {3}, ad::ParamGroup::kFusion);
  auto v = store.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + static_cast<double>(i);
  std::vector<double> sink(store.total_size(), 0.0);
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    tape.set_grad_sink(sink);
    auto a = tape.param(store, "a.w");
    CHECK(tape.param(store, 0).node() == a.node());
    auto loss = ad::add(ad::sum(ad::mul(a, a)), ad::sum(tape.param(store, "b.w")));
    tape.backward(loss);
  }
  CHECK(sink == std::vector<double>{4.0, 8.0, 2.0, 2.0, 2.0});
}

TEST_CASE("Adam first step moves by the learning rate") {
  ad::ParamStore<double> store;
  store.add("x", {1}, ad::ParamGroup::kFusion);
  ad::Adam<double> adam(1, {0.1});
  store.zero_grads();
  const std::vector<double> g = {1.0};
  store.accumulate_grads(g);
  adam.step(store);
  CHECK(store.values()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(adam.step_count() == 1);
  CHECK(store.grads()[0] == 1.0);
}

TEST_CASE("Adam leaves parameters alone under zero gradients and masks") {
  ad::ParamStore<double> store;
  store.add("p", {4}, ad::ParamGroup::kHidden);
  store.add("q", {2}, ad::ParamGroup::kAttention);
  auto v = store.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * static_cast<double>(i);
  const std::vector<double> before(v.begin(), v.end());
  ad::Adam<double> adam(store.total_size(), {0.1});
  store.zero_grads();
  store.accumulate_grads(std::vector<double>(6, 0.0));
  adam.step(store);
  CHECK(std::vector<double>(v.begin(), v.end()) == before);

  store.zero_grads();
  store.accumulate_grads(std::vector<double>(6, 1.0));
  const ad::ParamGroup hidden[] = {ad::ParamGroup::kHidden};
  adam.step(store, store.group_mask(hidden));
  CHECK(v[0] != before[0]);
  CHECK(v[4] == before[4]);
  CHECK(v[5] == before[5]);
}

TEST_CASE("Adam requires gradients") {
  ad::ParamStore<double> store;
  store.add("layer.w", {2}, ad::ParamGroup::kHidden);
  ad::Adam<double> adam(2, {});
  store.zero_grads();
  try {
    adam.step(store);
    FAIL("missing gradient accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("layer.w") != std::string::npos);
  }
}

TEST_CASE("Adam on x^2 follows the scalar reference and descends") {
  ad::ParamStore<double> store;
  store.add("x", {1}, ad::ParamGroup::kFusion);
  store.values()[0] = 1.0;
  ad::Adam<double> adam(1, {0.1});
  double x = 1.0, m = 0.0, s = 0.0;
  double prev = 1.0;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    s = 0.999 * s + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = s / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);

    store.zero_grads();
    store.accumulate_grads(std::vector<double>{2.0 * store.values()[0]});
    adam.step(store);
    const double got = store.values()[0];
    CHECK(got == doctest::Approx(x).epsilon(1e-9));
    CHECK(std::abs(got) < std::abs(prev));
    prev = got;
  }
}

TEST_CASE("OpenMP gemm kernels match the serial loops bitwise") {
  std::mt19937_64 rng(33);
  const std::size_t m = 160, k = 200, n = 96;  // above the fork threshold
  const auto a = gnosis::testing::uniform_vector(rng, m * k, -1, 1);
  const auto b = gnosis::testing::uniform_vector(rng, k * n, -1, 1);
  const auto bt = gnosis::testing::uniform_vector(rng, n * k, -1, 1);
  const auto at = gnosis::testing::uniform_vector(rng, k * m, -1, 1);
  const int threads = omp_get_max_threads();
  omp_set_num_threads(4);
  std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
  ad::kernels::gemm_nn(a.data(), b.data(), c1.data(), m, k, n, true);
  ad::kernels::gemm_nn_serial(a.data(), b.data(), c2.data(), m, k, n, true);
  CHECK(c1 == c2);
  ad::kernels::gemm_nt(a.data(), bt.data(), c1.data(), m, k, n, false);
  ad::kernels::gemm_nt_serial(a.data(), bt.data(), c2.data(), m, k, n, false);
  CHECK(c1 == c2);
  ad::kernels::gemm_tn(at.data(), b.data(), c1.data(), m, k, n, false);
  ad::kernels::gemm_tn_serial(at.data(), b.data(), c2.data(), m, k, n, false);
  CHECK(c1 == c2);
  omp_set_num_threads(threads);

  // against a naive triple loop
  double worst = 0.0;
  for (std::size_t i = 0; i < m; i += 17) {
    for (std::size_t j = 0; j < n; j += 13) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += at[p * m + i] * b[p * n + j];
      worst = std::max(worst, std::abs(s - c1[i * n + j]));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    Tape<double> tape;
    std::mt19937_64 rng(34);
    auto x = tape.variable({6, 8}, gnosis::testing::uniform_vector(rng, 48, -1, 1));
    auto y = ad::multihead_attention(x, x, x, 2);
    auto loss = gnosis::testing::weighted_sum(tape, ad::gelu(ad::layer_norm(y, tape.constant({8}, std::vector<double>(8, 1.0)),
                                                                          tape.zeros({8}))));
    tape.backward(loss);
    return std::pair(loss.item(), std::vector<double>(x.grad().begin(), x.grad().end()));
  };
  CHECK(run() == run());
}
