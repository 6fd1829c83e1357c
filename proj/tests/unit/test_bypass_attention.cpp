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

#include "oracles.hpp"
#include "vidmamba/attention.hpp"
#include "vidmamba/bypass.hpp"
#include "vidmamba/grad_check.hpp"
#include "vidmamba/linalg.hpp"
#include "vidmamba/rng.hpp"

using namespace vidmamba;

namespace {

// Token rows of a [T, C, H, W] video in frame-major order.
Tensor tokens_of(const Tensor& v) {
  const std::size_t T = v.dim(0), C = v.dim(1), P = v.dim(2) * v.dim(3);
  Tensor x({T * P, C});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < P; ++p) x.at(t * P + p, c) = v[(t * C + c) * P + p];
  return x;
}

Tensor video_of(const Tensor& x, const Shape& s) {
  const std::size_t C = s[1], P = s[2] * s[3];
  Tensor v(s);
  for (std::size_t t = 0; t < s[0]; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < P; ++p) v[(t * C + c) * P + p] = x.at(t * P + p, c);
  return v;
}

Tensor oracle_mixed(const Tensor& xq, const Tensor& xk, const Tensor& xv, const AttnParams& base,
                    const BypassAttnParams* bp, const std::vector<std::vector<std::size_t>>& keys) {
  const Tensor q = oracle::matmul(xq, base.w_q), k = oracle::matmul(xk, base.w_k);
  Tensor ql, kl;
  if (bp) {
    ql = oracle::matmul(xq, bp->w_q_low);
    kl = oracle::matmul(xk, bp->w_k_low);
  }
  const auto score = [&](std::size_t i, std::size_t j) {
    double full = 0.0, low = 0.0;
    for (std::size_t c = 0; c < q.dim(1); ++c) full += q.at(i, c) * k.at(j, c);
    if (!bp) return full;
    for (std::size_t c = 0; c < ql.dim(1); ++c) low += ql.at(i, c) * kl.at(j, c);
    return (1.0 - bp->phi) * low + bp->phi * full;
  };
  return oracle::attention_rows(xq.dim(0), keys, score, oracle::matmul(xv, base.w_v),
                                1.0 / std::sqrt(static_cast<double>(base.width())));
}

std::vector<std::vector<std::size_t>> all_keys(std::size_t q, std::size_t k) {
  std::vector<std::size_t> ks(k);
  for (std::size_t j = 0; j < k; ++j) ks[j] = j;
  return std::vector<std::vector<std::size_t>>(q, ks);
}

BypassAttnParams random_bypass(std::size_t d, std::size_t k, double phi, Rng& rng) {
  return {rng.normal_tensor({d, k}, 0.5), rng.normal_tensor({d, k}, 0.5), phi};
}

}  // namespace

TEST_CASE("base map and dense attention against double loops") {
  Rng rng(1);
  const AttnParams base = AttnParams::init(6, rng);
  const Tensor xq = rng.normal_tensor({5, 6}), xk = rng.normal_tensor({7, 6});
  const Tensor xv = rng.normal_tensor({7, 6});
  CHECK(oracle::max_abs_diff(base_map(xq, xk, base),
                             oracle::matmul(oracle::matmul(xq, base.w_q),
                                            oracle::transpose(oracle::matmul(xk, base.w_k)))) < 1e-12);
  CHECK(oracle::max_abs_diff(attention(xq, xk, xv, base),
                             oracle_mixed(xq, xk, xv, base, nullptr, all_keys(5, 7))) < 1e-12);
  const Tensor q = rng.normal_tensor({4, 3}), k = rng.normal_tensor({6, 3}), v = rng.normal_tensor({6, 2});
  const auto dotp = [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += q.at(i, c) * k.at(j, c);
    return s;
  };
  CHECK(oracle::max_abs_diff(vidmamba::attention(q, k, v),
                             oracle::attention_rows(4, all_keys(4, 6), dotp, v, 1 / std::sqrt(3.0))) < 1e-12);
}

TEST_CASE("softmax rows") {
  const Tensor p = softmax_rows(Tensor::from_rows({{0, 0}, {1000, 0}}));
  CHECK(p.at(0, 0) == 0.5);
  CHECK(p.at(1, 0) == 1.0);
  CHECK(p.at(1, 1) == 0.0);
}

TEST_CASE("mixed attention matches the oracle for every phi") {
  Rng rng(2);
  const AttnParams base = AttnParams::init(6, rng);
  const Tensor x = rng.normal_tensor({8, 6});
  for (double phi : {0.0, 0.3, 0.5, 1.0}) {
    const BypassAttnParams bp = random_bypass(6, 2, phi, rng);
    CHECK(oracle::max_abs_diff(mixed_attention(x, x, x, base, bp),
                               oracle_mixed(x, x, x, base, &bp, all_keys(8, 8))) < 1e-12);
  }
  CHECK_THROWS_AS(mixed_attention(x, x, x, base, random_bypass(6, 2, 1.5, rng)), ArgumentError);
}

TEST_CASE("phi = 1 is bit-identical to the base path") {
  Rng rng(3);
  const AttnParams base = AttnParams::init(4, rng);
  const Tensor x = rng.normal_tensor({9, 4});
  CHECK(mixed_attention(x, x, x, base, random_bypass(4, 2, 1.0, rng)) == attention(x, x, x, base));
  AttentionLayer layer(base, false);
  const Tensor v = rng.normal_tensor({3, 4, 2, 2});
  const Tensor plain = layer.sparse_causal(Var::constant(v)).value();
  layer.attach_bypass(random_bypass(4, 2, 1.0, rng), PhiMode::kFixed);
  CHECK(layer.sparse_causal(Var::constant(v)).value() == plain);
}

TEST_CASE("sparse causal attention sees frame 0 and the previous frame") {
  Rng rng(4);
  const AttnParams base = AttnParams::init(3, rng);
  const Shape s{4, 3, 2, 3};
  const Tensor v = rng.normal_tensor(s);
  const std::size_t P = 6;
  std::vector<std::vector<std::size_t>> keys(4 * P);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t j = 0; j < P; ++j) keys[t * P + p].push_back(j);
      if (t > 0)
        for (std::size_t j = 0; j < P; ++j) keys[t * P + p].push_back((t - 1) * P + j);
    }
  const Tensor x = tokens_of(v);
  const Tensor want = video_of(oracle_mixed(x, x, x, base, nullptr, keys), s);
  CHECK(oracle::max_abs_diff(sparse_causal_attention(v, base), want) < 1e-12);

  // Frame 3 must not depend on frames 1 or 3's future; frame 2 not on frame 3.
  Tensor v2 = v;
  for (std::size_t c = 0; c < 3; ++c) v2.at(3, c, 0, 0) += 1.0;
  const Tensor a = sparse_causal_attention(v, base), b = sparse_causal_attention(v2, base);
  for (std::size_t i = 0; i < 3 * 3 * P; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("temporal key groups") {
  const KeyGroups g = KeyGroups::temporal(3, 2);
  CHECK(g.group_keys.size() == 2);
  CHECK(g.group_keys[1] == std::vector<std::size_t>{1, 3, 5});
  CHECK(g.query_group[4] == 0);
}

TEST_CASE("svd init gives the best rank-k factors") {
  Rng rng(5);
  const AttnParams base = AttnParams::init(8, rng);
  const Tensor m = oracle::matmul(base.w_q, oracle::transpose(base.w_k));
  const Svd f = svd(m);
  for (std::size_t k : {1, 3, 7}) {
    const BypassAttnParams bp = svd_init(base, k);
    double tail = 0.0;
    for (std::size_t i = k; i < 8; ++i) tail += f.s[i] * f.s[i];
    CHECK(factor_error(base, bp) == doctest::Approx(std::sqrt(tail)).epsilon(1e-10));
    const Tensor low = oracle::matmul(bp.w_q_low, oracle::transpose(bp.w_k_low));
    CHECK(oracle::frobenius(low - m) == doctest::Approx(std::sqrt(tail)).epsilon(1e-10));
    for (int trial = 0; trial < 50; ++trial) {
      const BypassAttnParams rival = random_bypass(8, k, 0.5, rng);
      CHECK(factor_error(base, rival) > factor_error(base, bp));
    }
  }
  CHECK_THROWS_AS(svd_init(base, 8), ArgumentError);
  CHECK_THROWS_AS(svd_init(base, 0), ArgumentError);
}

TEST_CASE("svd init is exact below rank") {
  Rng rng(6);
  AttnParams base = AttnParams::init(6, rng);
  const Tensor a = rng.normal_tensor({6, 2}), b = rng.normal_tensor({2, 6});
  base.w_q = oracle::matmul(a, b);
  const BypassAttnParams bp = svd_init(base, 3, 0.25);
  CHECK(factor_error(base, bp) < 1e-9);
  const Tensor x = rng.normal_tensor({7, 6});
  CHECK(oracle::max_abs_diff(mixed_attention(x, x, x, base, bp), attention(x, x, x, base)) < 1e-9);
}

TEST_CASE("jl bound and verifier") {
  CHECK(jl_bound(256, 0.9) == doctest::Approx(2 * std::exp(-(0.81 - 0.729) * 256 / 4)));
  const JlResult r = jl_verify(64, 32, 0.5, 300, 9);
  CHECK(r.trials == 300);
  CHECK(r.failure_rate == doctest::Approx(r.failures / 300.0));
  CHECK(r.within_bound);
  CHECK(jl_verify(64, 32, 0.5, 300, 9).failures == r.failures);
  const JlResult orth = jl_verify(16, 16, 0.1, 50, 3, JlProjection::kOrthonormal);
  CHECK(orth.failures == 0);
  CHECK_THROWS_AS(jl_verify(16, 8, 0.1, 10, 3, JlProjection::kOrthonormal), ArgumentError);
}

TEST_CASE("parameter audit") {
  const ParamAudit a = param_audit(320, 12, 16);
  CHECK(a.trainable_per_layer == 2 * 320 * 12);
  CHECK(a.full_per_layer == 2 * 320 * 320);
  CHECK(a.trainable_total == 16 * a.trainable_per_layer);
  CHECK(a.ratio == 12.0 / 320.0);
}

TEST_CASE("attention layer parameter sets") {
  Rng rng(7);
  const AttnParams base = AttnParams::init(6, rng);
  AttentionLayer layer(base, true);
  NamedParams ps;
  layer.collect("a.", ps);
  CHECK(ps.size() == 3);
  layer.attach_bypass({.rank = 2, .phi = 0.4, .phi_mode = PhiMode::kLearnable});
  CHECK(layer.phi() == doctest::Approx(0.4).epsilon(1e-12));
  ps.clear();
  layer.collect("a.", ps);
  REQUIRE(ps.size() == 3);
  CHECK(ps[0].first == "a.w_q_low");
  CHECK(ps[1].first == "a.w_k_low");
  CHECK(ps[2].first == "a.phi_logit");
  NamedParams all;
  layer.collect_all("a.", all);
  CHECK(all.size() == 6);
  std::size_t trainable = 0;
  for (const auto& [n, v] : ps) trainable += n == "a.phi_logit" ? 0 : v.value().size();
  CHECK(static_cast<double>(trainable) / (2 * 36) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("bypass layer gradients pass finite differences") {
  Rng rng(8);
  AttentionLayer layer(AttnParams::init(4, rng), false);
  layer.attach_bypass(random_bypass(4, 2, 0.6, rng), PhiMode::kLearnable);
  const Var v = Var::parameter(rng.normal_tensor({3, 4, 2, 2}));
  const Tensor w = rng.normal_tensor({3, 4, 2, 2});
  NamedParams ps{{"video", v}};
  layer.collect("", ps);
  for (const auto& c : grad_check_params([&] { return ad::weighted_sum(layer.sparse_causal(v), w); },
                                         ps, 1e-3, Stencil::kFourthOrder)) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-6);
  }
}
