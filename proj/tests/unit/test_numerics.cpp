// Copyright 2026 The vidmamba Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "vidmamba/autodiff.hpp"
#include "vidmamba/grad_check.hpp"
#include "vidmamba/linalg.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/serialize.hpp"

using namespace vidmamba;

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor a({2, 3}, 1.0);
  CHECK_THROWS_AS(a += Tensor({3, 2}), DimensionError);
  const Tensor r = Tensor({2, 3}, {1, 2, 3, 4, 5, 6}).reshaped({3, 2});
  CHECK(r.at(2, 1) == 6.0);
  CHECK_THROWS_AS(r.reshaped({4, 2}), DimensionError);
  CHECK(Tensor::identity(3).at(1, 1) == 1.0);
  CHECK(sum(Tensor::identity(3)) == 3.0);
}

TEST_CASE("rng is reproducible and streams are independent") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool all_same = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    all_same &= x == b.next_u64();
    any_diff |= x != c.next_u64();
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("rng moments") {
  Rng rng(3);
  constexpr int n = 200000;
  double s = 0, s2 = 0, u = 0;
  std::array<int, 5> counts{};
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
    const double v = rng.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    u += v;
    ++counts[rng.below(5)];
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(std::abs(u / n - 0.5) < 0.005);
  for (int k : counts) CHECK(std::abs(k / double(n) - 0.2) < 0.01);
}

TEST_CASE("matmul variants match the triple loop") {
  Rng rng(1);
  for (auto [m, n, p] : {std::tuple{1, 1, 1}, {3, 5, 2}, {17, 9, 13}, {64, 33, 40}}) {
    const Tensor a = rng.normal_tensor({std::size_t(m), std::size_t(n)});
    const Tensor b = rng.normal_tensor({std::size_t(n), std::size_t(p)});
    const Tensor want = oracle::matmul(a, b);
    CHECK(oracle::max_abs_diff(matmul(a, b), want) < 1e-12);
    CHECK(oracle::max_abs_diff(matmul_tn(oracle::transpose(a), b), want) < 1e-12);
    CHECK(oracle::max_abs_diff(matmul_nt(a, oracle::transpose(b)), want) < 1e-12);
  }
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("multiply counter") {
  reset_multiply_count();
  matmul(Tensor({4, 5}), Tensor({5, 6}));
  CHECK(multiply_count() == 120);
}

TEST_CASE("expm against closed forms and a series oracle") {
  const double th = 0.7;
  const Tensor rot = expm(Tensor::from_rows({{0, -th}, {th, 0}}));
  CHECK(rot.at(0, 0) == doctest::Approx(std::cos(th)).epsilon(1e-14));
  CHECK(rot.at(1, 0) == doctest::Approx(std::sin(th)).epsilon(1e-14));
  const Tensor d = expm(Tensor::from_rows({{-3, 0}, {0, 2}}));
  CHECK(d.at(0, 0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
  CHECK(d.at(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK(d.at(0, 1) == 0.0);
  Rng rng(2);
  for (double scale : {0.01, 1.0, 8.0}) {
    const Tensor a = rng.normal_tensor({6, 6}, scale);
    const Tensor want = oracle::expm_squaring(a);
    CHECK(oracle::max_abs_diff(expm(a), want) < 1e-11 * (1.0 + oracle::frobenius(want)));
  }
  CHECK_THROWS_AS(expm(Tensor({2, 3})), DimensionError);
}

TEST_CASE("solve") {
  Rng rng(4);
  const Tensor a = rng.normal_tensor({8, 8}) + Tensor::identity(8) * 4.0;
  const Tensor b = rng.normal_tensor({8, 3});
  const Tensor x = solve(a, b);
  CHECK(oracle::max_abs_diff(oracle::matmul(a, x), b) < 1e-12);
  CHECK_THROWS_AS(solve(Tensor::from_rows({{1, 2}, {2, 4}}), Tensor({2, 1}, 1.0)), NumericError);
}

TEST_CASE("svd factors") {
  Rng rng(5);
  for (auto [m, n] : {std::pair{5, 5}, {9, 4}, {4, 9}}) {
    const Tensor a = rng.normal_tensor({std::size_t(m), std::size_t(n)});
    const Svd f = svd(a);
    CHECK(oracle::max_abs_diff(svd_reconstruct(f), a) < 1e-12);
    const std::size_t r = std::min(m, n);
    CHECK(oracle::max_abs_diff(oracle::matmul(oracle::transpose(f.u), f.u), oracle::identity(r)) < 1e-12);
    CHECK(oracle::max_abs_diff(oracle::matmul(oracle::transpose(f.v), f.v), oracle::identity(r)) < 1e-12);
    for (std::size_t i = 1; i < r; ++i) CHECK(f.s[i] <= f.s[i - 1]);
  }
  // Known spectrum: orthogonal factors around diag(5, 3, 1, 0).
  const Tensor q1 = orthonormalize_columns(rng.normal_tensor({4, 4}));
  const Tensor q2 = orthonormalize_columns(rng.normal_tensor({4, 4}));
  const Tensor a = oracle::matmul(oracle::matmul(q1, diag(Tensor::vector({5, 3, 1, 0}))),
                                  oracle::transpose(q2));
  const Svd f = svd(a);
  CHECK(f.s[0] == doctest::Approx(5.0).epsilon(1e-13));
  CHECK(f.s[1] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(f.s[2] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(f.s[3]) < 1e-13);
}

TEST_CASE("tensor blob layout and round trip") {
  const Tensor t({2, 3}, {1.5, -2, 0, 3.25, 1e-300, -7});
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 8 + 16 + 48);
  CHECK(bytes.substr(0, 4) == "VMT1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[12] == 2);
  CHECK(bytes[20] == 3);
  CHECK(read_tensor(ss) == t);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_tensor(bad), Error);
  std::stringstream trunc(bytes.substr(0, 30));
  CHECK_THROWS_AS(read_tensor(trunc), Error);
}

TEST_CASE("archive round trip") {
  TensorArchive a{{"b.w", Tensor({2}, {1, 2})}, {"a", Tensor::scalar(3)}};
  std::stringstream ss;
  write_archive(ss, a);
  CHECK(ss.str().substr(0, 8) == "VMARCH01");
  CHECK(read_archive(ss) == a);
}

TEST_CASE("autodiff matches hand-derived gradients") {
  Rng rng(6);
  const Var x = Var::parameter(rng.normal_tensor({3, 4}));
  const Var w = Var::parameter(rng.normal_tensor({4, 2}));
  // L = sum(silu(x w)); dL/dw = x^T silu'(x w).
  const Var l = ad::sum(ad::silu(ad::matmul(x, w)));
  backward(l);
  const Tensor z = oracle::matmul(x.value(), w.value());
  Tensor ds(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    ds[i] = s * (1.0 + z[i] * (1.0 - s));
  }
  CHECK(oracle::max_abs_diff(w.grad(), oracle::matmul(oracle::transpose(x.value()), ds)) < 1e-12);
  CHECK(oracle::max_abs_diff(x.grad(), oracle::matmul(ds, oracle::transpose(w.value()))) < 1e-12);
}

TEST_CASE("autodiff ops pass finite differences") {
  Rng rng(7);
  const Var a = Var::parameter(rng.normal_tensor({2, 3, 4, 4}));
  const Var b = Var::parameter(rng.normal_tensor({2, 3, 4, 4}));
  const Var cw = Var::parameter(rng.normal_tensor({2, 3, 3, 3}, 0.3));
  const Var cb = Var::parameter(rng.normal_tensor({2}));
  const Var bias = Var::parameter(rng.normal_tensor({3}));
  const Var s = Var::parameter(Tensor::scalar(0.4));
  const Tensor w = rng.normal_tensor({2, 2, 4, 4});
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 40; ++i) idx.push_back(i % 5 == 0 ? ad::kFill : (i * 7) % 96);
  const auto loss = [&] {
    Var h = ad::add_channel_bias(ad::mul(a, ad::sigmoid(b)), bias);
    h = ad::sub(ad::scale_by(h, s), ad::one_minus(b));
    Var c = ad::conv_frames(ad::silu(h), cw, cb);
    Var g = ad::gather(a, idx, {40});
    return ad::add(ad::weighted_sum(c, w), ad::add(ad::mse(g, Var::constant(Tensor({40}, 0.1))),
                                                   ad::sum(ad::reshape(ad::scale(cb, 2.0), {1, 2}))));
  };
  const std::vector<std::pair<std::string, Var>> ps{{"a", a}, {"b", b}, {"cw", cw}, {"cb", cb}, {"bias", bias}, {"s", s}};
  for (const auto& c : grad_check_params(loss, ps, 1e-3, Stencil::kFourthOrder)) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-6);
  }
}

TEST_CASE("grad_check flags a wrong gradient") {
  const Differentiable good{[](const Tensor& x) { return x[0] * x[0] + std::sin(x[1]); },
                            [](const Tensor& x) { return Tensor({2}, {2 * x[0], std::cos(x[1])}); }};
  Differentiable bad = good;
  bad.gradient = [](const Tensor& x) { return Tensor({2}, {2 * x[0], 1.01 * std::cos(x[1])}); };
  const Tensor x({2}, {0.3, -1.2});
  CHECK(grad_check(good, x) < 1e-8);
  CHECK(grad_check(bad, x) > 1e-3);
  CHECK_THROWS_AS(grad_check(good, x, 0.0), ArgumentError);
}

TEST_CASE("fourth-order stencil") {
  const Var x = Var::parameter(Tensor({3}, {0.2, -0.5, 1.1}));
  const auto loss = [&] { return ad::sum(ad::mul(ad::silu(x), ad::sigmoid(x))); };
  const auto c = grad_check_params(loss, {{"x", x}}, 1e-3, Stencil::kFourthOrder);
  CHECK(c[0].max_rel_error < 1e-9);
}
