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
#include "vidmamba/grad_check.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/temporal_mamba.hpp"

using namespace vidmamba;

namespace {

Tensor flip_loops(const Tensor& v, int branch) {
  const std::size_t T = v.dim(0), C = v.dim(1), H = v.dim(2), W = v.dim(3);
  Tensor out(v.shape());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          out.at(t, c, i, j) = v.at(branch & 1 ? T - 1 - t : t, c, branch & 2 ? H - 1 - i : i,
                                    branch & 2 ? W - 1 - j : j);
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Block output built stage by stage from plain loops; only the selective scan
// itself is delegated to the (separately tested) kernel.
Tensor block_oracle(const MambaBlockParams& p, const Tensor& x, bool learnable_padding) {
  const std::size_t T = x.dim(0), C = x.dim(1);
  Tensor xp = x;
  if (learnable_padding) {
    xp = Tensor({T, C, x.dim(2) + 2, x.dim(3) + 2});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < xp.dim(2); ++i)
          for (std::size_t j = 0; j < xp.dim(3); ++j) {
            const bool ring = i == 0 || j == 0 || i + 1 == xp.dim(2) || j + 1 == xp.dim(3);
            xp.at(t, c, i, j) = ring ? p.theta[c] : x.at(t, c, i - 1, j - 1);
          }
  }
  const std::size_t H = xp.dim(2), W = xp.dim(3), L = T * H * W;
  const std::size_t E = p.w_in.dim(1), K = p.conv_w.dim(1);
  Tensor fused(xp.shape());
  for (int br = 0; br < 4; ++br) {
    const Tensor f = flip_loops(xp, br);
    Tensor tok({L, C});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) tok.at((t * H + i) * W + j, c) = f.at(t, c, i, j);
    const Tensor u = oracle::matmul(tok, p.w_in);
    Tensor conv({L, E});
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        double s = p.conv_b[e];
        for (std::size_t k = 0; k < K; ++k)
          if (t + k >= K - 1) s += p.conv_w.at(e, k) * u.at(t + k - (K - 1), e);
        conv.at(t, e) = silu(s);
      }
    const Tensor y = selective_scan(p.ssm, conv);
    const Tensor g = oracle::matmul(tok, p.w_gate);
    Tensor yg({L, E});
    for (std::size_t n = 0; n < yg.size(); ++n) yg[n] = y[n] * silu(g[n]);
    const Tensor out = oracle::matmul(yg, p.w_out);
    Tensor vid(xp.shape());
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) vid.at(t, c, i, j) = out.at((t * H + i) * W + j, c);
    fused += flip_loops(vid, br);
  }
  Tensor res = x;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < x.dim(2); ++i)
        for (std::size_t j = 0; j < x.dim(3); ++j)
          res.at(t, c, i, j) += learnable_padding ? fused.at(t, c, i + 1, j + 1) : fused.at(t, c, i, j);
  return res;
}

MambaBlockParams active_params(const MambaBlockConfig& cfg, Rng& rng) {
  MambaBlockParams p = MambaBlockParams::init(cfg, rng);
  p.w_out = rng.normal_tensor(p.w_out.shape(), 0.5);
  p.conv_b = rng.normal_tensor(p.conv_b.shape(), 0.2);
  return p;
}

}  // namespace

TEST_CASE("a fresh block is the identity") {
  Rng rng(1);
  const MambaBlock b({.channels = 3, .state_dim = 2}, rng);
  const Tensor x = rng.normal_tensor({2, 3, 4, 4});
  CHECK(b.forward(Var::constant(x)).value() == x);
}

TEST_CASE("block forward matches the stage-by-stage oracle") {
  for (PaddingMode mode : {PaddingMode::kNone, PaddingMode::kLearnable}) {
    Rng rng(2);
    const MambaBlockConfig cfg{.channels = 2, .inner = 3, .state_dim = 2, .padding = mode};
    const MambaBlockParams p = active_params(cfg, rng);
    const Tensor x = rng.normal_tensor({3, 2, 3, 4});
    const Tensor got = MambaBlock(cfg, p).forward(Var::constant(x)).value();
    CHECK(oracle::max_abs_diff(got, block_oracle(p, x, mode == PaddingMode::kLearnable)) < 1e-12);
  }
}

TEST_CASE("fuse is the permute-then-sum and the fault hook breaks it") {
  Rng rng(3);
  std::array<Tensor, 4> br;
  for (auto& b : br) b = rng.normal_tensor({3, 2, 2, 3});
  Tensor want = br[0];
  for (int i = 1; i < 4; ++i) want += flip_loops(br[i], i);
  CHECK(fuse(br) == want);
  set_fuse_fault_for_testing(true);
  const Tensor broken = fuse(br);
  set_fuse_fault_for_testing(false);
  CHECK(oracle::max_abs_diff(broken, want) > 1e-3);
  CHECK_FALSE(fuse_fault_for_testing());
}

TEST_CASE("identical branches fuse to four times the input") {
  Rng rng(4);
  const Tensor v = rng.normal_tensor({2, 1, 3, 3});
  std::array<Tensor, 4> br;
  for (int i = 0; i < 4; ++i) br[i] = flip_loops(v, i);
  CHECK(oracle::max_abs_diff(fuse(br), v * 4.0) == 0.0);
}

TEST_CASE("block commutes with every flip") {
  Rng rng(5);
  const MambaBlockConfig cfg{.channels = 3, .inner = 4, .state_dim = 2};
  const MambaBlock b(cfg, active_params(cfg, rng));
  const Tensor x = rng.normal_tensor({3, 3, 4, 5});
  const Tensor y = b.forward(Var::constant(x)).value();
  for (int j = 0; j < 4; ++j) {
    const Tensor yf = b.forward(Var::constant(flip_loops(x, j))).value();
    CHECK(oracle::max_abs_diff(yf, flip_loops(y, j)) < 1e-9);
  }
}

TEST_CASE("causal depthwise conv only looks back") {
  Rng rng(6);
  const Tensor w = rng.normal_tensor({2, 4});
  const Tensor b = rng.normal_tensor({2});
  Tensor x = rng.normal_tensor({10, 2});
  const Tensor y = causal_depthwise_conv(x, w, b);
  CHECK(y.at(0, 1) == doctest::Approx(b[1] + w.at(1, 3) * x.at(0, 1)).epsilon(1e-15));
  CHECK(y.at(5, 0) == doctest::Approx(b[0] + w.at(0, 0) * x.at(2, 0) + w.at(0, 1) * x.at(3, 0) +
                                      w.at(0, 2) * x.at(4, 0) + w.at(0, 3) * x.at(5, 0))
                          .epsilon(1e-14));
  x.at(6, 0) += 1.0;
  const Tensor y2 = causal_depthwise_conv(x, w, b);
  for (std::size_t t = 0; t < 6; ++t) CHECK(y2.at(t, 0) == y.at(t, 0));
  CHECK(y2.at(6, 0) != y.at(6, 0));
}

TEST_CASE("padding modes and parameter collection") {
  Rng rng(7);
  for (auto [mode, has_theta] : {std::pair{PaddingMode::kNone, false},
                                 {PaddingMode::kFixedToken, false},
                                 {PaddingMode::kLearnable, true}}) {
    const MambaBlock b({.channels = 2, .state_dim = 2, .padding = mode}, rng);
    NamedParams ps;
    b.collect("m.", ps);
    bool found = false;
    for (const auto& [n, v] : ps) found |= n == "m.theta_frame";
    CHECK(found == has_theta);
    CHECK(ps.front().first == "m.w_in");
    const Tensor x = rng.normal_tensor({2, 2, 3, 3});
    CHECK(b.forward(Var::constant(x)).value().shape() == x.shape());
  }
  CHECK(parse_padding_mode("learnable") == PaddingMode::kLearnable);
  CHECK_THROWS_AS(parse_padding_mode("ring"), ConfigError);
}

TEST_CASE("parameter count") {
  Rng rng(8);
  const MambaBlockConfig cfg{.channels = 3, .inner = 5, .state_dim = 2, .conv_width = 4};
  const MambaBlock b(cfg, rng);
  // w_in, w_gate, conv_w, conv_b, ssm (a_log, w_b, b_b, w_c, b_c, w_dt, b_dt), w_out, theta
  const std::size_t want = 15 + 15 + 20 + 5 + (10 + 10 + 2 + 10 + 2 + 25 + 5) + 15 + 3;
  CHECK(b.parameter_count() == want);
  const BlockStack s(cfg, 3, rng);
  CHECK(s.depth() == 3);
  CHECK(s.parameter_count() == 3 * want);
  CHECK_THROWS_AS(BlockStack(cfg, 0, rng), ConfigError);
}

TEST_CASE("wrong channel count is rejected") {
  Rng rng(9);
  const MambaBlock b({.channels = 3}, rng);
  CHECK_THROWS_AS(b.forward(Var::constant(Tensor({2, 2, 3, 3}))), DimensionError);
}

TEST_CASE("block gradients pass finite differences") {
  Rng rng(10);
  const MambaBlockConfig cfg{.channels = 2, .inner = 3, .state_dim = 2};
  const BlockStack stack(std::vector<MambaBlock>{MambaBlock(cfg, active_params(cfg, rng)),
                                                 MambaBlock(cfg, active_params(cfg, rng))});
  const Var x = Var::parameter(rng.normal_tensor({2, 2, 3, 3}));
  const Tensor w = rng.normal_tensor({2, 2, 3, 3});
  NamedParams ps{{"x", x}};
  stack.collect("", ps);
  for (const auto& c : grad_check_params([&] { return ad::weighted_sum(stack.forward(x), w); }, ps,
                                         1e-3, Stencil::kFourthOrder)) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-5);
  }
}

TEST_CASE("temporal flip is invisible on a single frame") {
  Rng rng(11);
  const MambaBlockConfig cfg{.channels = 2, .inner = 3, .state_dim = 2};
  const MambaBlock b(cfg, active_params(cfg, rng));
  const Var x = b.pad(Var::constant(rng.normal_tensor({1, 2, 3, 3})));
  CHECK(b.branch_forward(x, 0).value() == b.branch_forward(x, 1).value());
  CHECK(b.branch_forward(x, 2).value() == b.branch_forward(x, 3).value());
}

TEST_CASE("zero input through an all-zero block gives zero") {
  const MambaBlockConfig cfg{.channels = 2, .inner = 2, .state_dim = 2, .padding = PaddingMode::kNone};
  Rng rng(12);
  MambaBlockParams p = MambaBlockParams::init(cfg, rng);
  p.w_out = oracle::identity(2);
  const Tensor zero({2, 2, 2, 2});
  CHECK(MambaBlock(cfg, p).branch_forward(Var::constant(zero), 2).value() == zero);
}

TEST_CASE("depth 2 with a fresh second block equals depth 1") {
  Rng rng(13);
  const MambaBlockConfig cfg{.channels = 2, .inner = 3, .state_dim = 2};
  const MambaBlock first(cfg, active_params(cfg, rng));
  const MambaBlock fresh(cfg, rng);
  const Tensor x = rng.normal_tensor({2, 2, 3, 3});
  const Tensor one = BlockStack({first}).forward(Var::constant(x)).value();
  CHECK(one == first.forward(Var::constant(x)).value());
  CHECK(BlockStack({first, fresh}).forward(Var::constant(x)).value() == one);
}
