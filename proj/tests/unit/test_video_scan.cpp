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

#include <set>

#include "oracles.hpp"
#include "vidmamba/grad_check.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/video_scan.hpp"

using namespace vidmamba;

namespace {

// Sequence position of grid cell (t, i, j) for a spatial-first traversal.
std::size_t oracle_position(ScanOrder o, std::size_t t, std::size_t i, std::size_t j,
                            std::size_t frames, std::size_t h, std::size_t w) {
  const bool trev = o == ScanOrder::kSpatialFwdTemporalRev || o == ScanOrder::kSpatialRevTemporalRev;
  const bool srev = o == ScanOrder::kSpatialRevTemporalFwd || o == ScanOrder::kSpatialRevTemporalRev;
  const std::size_t tt = trev ? frames - 1 - t : t;
  const std::size_t pix = srev ? (h - 1 - i) * w + (w - 1 - j) : i * w + j;
  return tt * h * w + pix;
}

Tensor oracle_flip(const Tensor& v, int branch) {
  const std::size_t T = v.dim(0), C = v.dim(1), H = v.dim(2), W = v.dim(3);
  Tensor out(v.shape());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          const std::size_t st = branch & 1 ? T - 1 - t : t;
          const std::size_t si = branch & 2 ? H - 1 - i : i;
          const std::size_t sj = branch & 2 ? W - 1 - j : j;
          out.at(t, c, i, j) = v.at(st, c, si, sj);
        }
  return out;
}

}  // namespace

TEST_CASE("layouts match the index oracle and are bijections") {
  for (auto [T, H, W] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {3, 2, 5}, {4, 4, 4}}) {
    for (ScanOrder o : kAllScanOrders) {
      const ScanLayout l = make_layout(T, H, W, o);
      REQUIRE(l.length() == T * H * W);
      std::set<std::size_t> seen;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) {
            const std::size_t g = (t * H + i) * W + j;
            CHECK(l.forward_index[g] == oracle_position(o, t, i, j, T, H, W));
            CHECK(l.inverse_index[l.forward_index[g]] == g);
            seen.insert(l.forward_index[g]);
          }
      CHECK(seen.size() == T * H * W);
    }
  }
}

TEST_CASE("frame separators add one empty slot between frames") {
  const ScanLayout l = make_layout(3, 2, 2, ScanOrder::kSpatialFwdTemporalFwd, true);
  CHECK(l.length() == 14);
  CHECK(l.inverse_index[4] == ScanLayout::kNoGrid);
  CHECK(l.inverse_index[9] == ScanLayout::kNoGrid);
  CHECK(l.forward_index[4] == 5);
  Rng rng(1);
  const Tensor v = rng.normal_tensor({3, 2, 2, 2});
  const Tensor tok = flatten(v, l);
  CHECK(tok.at(4, 0) == 0.0);
  CHECK(tok.at(4, 1) == 0.0);
  CHECK(unflatten(tok, l) == v);
}

TEST_CASE("flatten places channels per token") {
  Rng rng(2);
  const Tensor v = rng.normal_tensor({2, 3, 2, 3});
  for (ScanOrder o : kAllScanOrders) {
    const Flattened f = flatten(v, o);
    CHECK(f.tokens.shape() == Shape{12, 3});
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          for (std::size_t c = 0; c < 3; ++c)
            CHECK(f.tokens.at(oracle_position(o, t, i, j, 2, 2, 3), c) == v.at(t, c, i, j));
    CHECK(unflatten(f.tokens, f.layout) == v);
  }
}

TEST_CASE("flips match the oracle and form the Klein four-group") {
  Rng rng(3);
  const Tensor v = rng.normal_tensor({3, 2, 3, 4});
  for (int a = 0; a < 4; ++a) {
    CHECK(flip(v, a) == oracle_flip(v, a));
    CHECK(unflip(flip(v, a), a) == v);
    for (int b = 0; b < 4; ++b) CHECK(flip(flip(v, a), b) == flip(v, a ^ b));
    const auto idx = flip_index(v.shape(), a);
    Tensor g(v.shape());
    for (std::size_t k = 0; k < idx.size(); ++k) g[k] = v[idx[k]];
    CHECK(g == flip(v, a));
  }
  CHECK_THROWS_AS(flip(v, 4), ArgumentError);
}

TEST_CASE("scan order k equals the identity scan of flip k") {
  Rng rng(4);
  const Tensor v = rng.normal_tensor({3, 2, 3, 3});
  const ScanLayout id = make_layout(3, 3, 3, ScanOrder::kSpatialFwdTemporalFwd);
  for (int k = 0; k < 4; ++k) {
    CHECK(flatten(v, kAllScanOrders[k]).tokens == flatten(flip(v, k), id));
  }
}

TEST_CASE("frame padding ring") {
  Rng rng(5);
  const Tensor v = rng.normal_tensor({2, 2, 3, 4});
  const FramePadding p{Tensor({2}, {0.5, -1.5})};
  const Tensor padded = pad_frames(v, p);
  REQUIRE(padded.shape() == Shape{2, 2, 5, 6});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
          const bool ring = i == 0 || j == 0 || i == 4 || j == 5;
          CHECK(padded.at(t, c, i, j) == (ring ? p.theta[c] : v.at(t, c, i - 1, j - 1)));
        }
  CHECK(crop_frames(padded) == v);
}

TEST_CASE("graph ops pass finite differences") {
  Rng rng(6);
  const Var video = Var::parameter(rng.normal_tensor({2, 2, 3, 3}));
  const Var theta = Var::parameter(rng.normal_tensor({2}));
  const ScanLayout l = make_layout(2, 5, 5, ScanOrder::kSpatialRevTemporalRev, true);
  const Tensor w = rng.normal_tensor({l.length(), 2});
  const Tensor w2 = rng.normal_tensor({2, 2, 3, 3});
  const auto loss = [&] {
    const Var padded = ad::flip(ad::pad_frames(video, theta), 3);
    const Var tok = ad::flatten(padded, l);
    const Var back = ad::crop_frames(ad::unflatten(ad::mul(tok, tok), l));
    return ad::add(ad::weighted_sum(tok, w), ad::weighted_sum(back, w2));
  };
  for (const auto& c : grad_check_params(loss, {{"video", video}, {"theta", theta}})) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-6);
  }
}
