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

#pragma once

#include <vector>

#include "vidmamba/autodiff.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Which keys each query may attend to. Queries sharing a group share a key
// list; key lists may repeat indices.
struct KeyGroups {
  std::vector<std::size_t> query_group;             // per query
  std::vector<std::vector<std::size_t>> group_keys;  // per group

  // Every query sees every key.
  static KeyGroups dense(std::size_t queries, std::size_t keys);
  // Queries laid out frame-major ([T * P] tokens, P per frame). Frame t
  // attends to frame 0 followed by frame t - 1; frame 0 attends to itself.
  static KeyGroups sparse_causal(std::size_t frames, std::size_t per_frame);
  // Token (t, p) attends to (0..T-1, p): attention across time per position.
  static KeyGroups temporal(std::size_t frames, std::size_t per_frame);
};

// One bilinear contribution weight * <q_i, k_j> to the pre-softmax score.
struct ScoreTerm {
  Var weight;  // [1]
  Var q;       // [Lq, r]
  Var k;       // [Lk, r]
};

// out_i = sum_j softmax_j(scale * sum_m w_m <q_m,i , k_m,j>) v_j over the keys
// of query i's group. Rows are evaluated one at a time, so memory is O(Lk)
// unless gradients are needed.
namespace ad {
Var grouped_attention(const std::vector<ScoreTerm>& terms, const Var& v,
                      const KeyGroups& groups, double scale);
}  // namespace ad

// Softmax(Q K^T / sqrt(d)) V with d = Q's width.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Row-wise softmax of a score matrix.
Tensor softmax_rows(const Tensor& scores);

}  // namespace vidmamba
