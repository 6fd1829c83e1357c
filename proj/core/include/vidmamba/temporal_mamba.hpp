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

#include <array>
#include <string>
#include <vector>

#include "vidmamba/autodiff.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/selective_scan.hpp"
#include "vidmamba/video_scan.hpp"

namespace vidmamba {

// How frame boundaries are marked before scanning.
enum class PaddingMode {
  kNone,        // frames concatenated as-is
  kFixedToken,  // a constant zero token between consecutive frames
  kLearnable,   // one-pixel learnable ring around every frame
};

std::string_view to_string(PaddingMode mode);
PaddingMode parse_padding_mode(std::string_view name);

struct MambaBlockConfig {
  std::size_t channels = 8;
  std::size_t inner = 0;  // 0 means 2 * channels
  std::size_t state_dim = 4;
  std::size_t conv_width = 4;
  PaddingMode padding = PaddingMode::kLearnable;

  std::size_t inner_width() const { return inner ? inner : 2 * channels; }
};

struct MambaBlockParams {
  Tensor w_in;    // [C, E]
  Tensor w_gate;  // [C, E]
  Tensor conv_w;  // [E, K], column K-1 multiplies the current token
  Tensor conv_b;  // [E]
  SelectiveParams ssm;
  Tensor w_out;   // [E, C]
  Tensor theta;   // [C]

  // Output projection starts at zero, so a fresh block is the identity map.
  static MambaBlockParams init(const MambaBlockConfig& cfg, Rng& rng);
};

// Causal depthwise 1-D convolution along the token axis.
// x[L, E], w[E, K], b[E]: y[t, e] = b[e] + sum_k w[e, k] x[t - (K - 1) + k, e].
Tensor causal_depthwise_conv(const Tensor& x, const Tensor& w, const Tensor& b);

// sum of branch 0 with the inverse flips of branches 1..3.
Tensor fuse(const std::array<Tensor, 4>& branches);

// Test hook: when set, fuse() negates branch 3 so fault-injection runs can
// confirm that the verification suite notices.
void set_fuse_fault_for_testing(bool on);
bool fuse_fault_for_testing();

namespace ad {
Var causal_depthwise_conv(const Var& x, const Var& w, const Var& b);
Var fuse(const std::array<Var, 4>& branches);
}  // namespace ad

using NamedParams = std::vector<std::pair<std::string, Var>>;

// Four weight-shared flip branches over a padded video, fused and cropped,
// with a residual connection.
class MambaBlock {
 public:
  MambaBlock(const MambaBlockConfig& cfg, Rng& rng);
  MambaBlock(const MambaBlockConfig& cfg, const MambaBlockParams& params);

  // flip_i -> flatten -> in-proj -> causal conv -> SiLU -> selective scan ->
  // SiLU gate -> out-proj -> unflatten. Output has the input's shape.
  Var branch_forward(const Var& x_padded, int branch) const;
  // Frame padding as configured, used by forward().
  Var pad(const Var& x) const;
  Var forward(const Var& x) const;

  MambaBlockParams snapshot() const;
  void collect(const std::string& prefix, NamedParams& out) const;
  std::size_t parameter_count() const;
  const MambaBlockConfig& config() const { return cfg_; }

 private:
  void check_input(const Shape& s) const;

  MambaBlockConfig cfg_;
  Var w_in_, w_gate_, conv_w_, conv_b_, w_out_, theta_;
  SelectiveVars ssm_;
};

class BlockStack {
 public:
  BlockStack(const MambaBlockConfig& cfg, std::size_t depth, Rng& rng);
  explicit BlockStack(std::vector<MambaBlock> blocks);

  Var forward(const Var& x) const;
  std::size_t depth() const { return blocks_.size(); }
  const std::vector<MambaBlock>& blocks() const { return blocks_; }
  void collect(const std::string& prefix, NamedParams& out) const;
  std::size_t parameter_count() const;

 private:
  std::vector<MambaBlock> blocks_;
};

}  // namespace vidmamba
