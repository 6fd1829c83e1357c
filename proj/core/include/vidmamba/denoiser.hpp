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

#include <optional>
#include <string>
#include <string_view>

#include "vidmamba/bypass.hpp"
#include "vidmamba/serialize.hpp"
#include "vidmamba/temporal_mamba.hpp"

namespace vidmamba {

enum class MambaPlacement {
  kReplace,      // Mamba stack takes the temporal-attention slot
  kInsertAfter,  // temporal attention kept, Mamba stack follows it
};
std::string_view to_string(MambaPlacement p);
MambaPlacement parse_placement(std::string_view name);

struct DenoiserConfig {
  std::size_t channels = 3;   // latent channels
  std::size_t width = 8;      // feature width F
  std::size_t cond_dim = 4;
  std::size_t time_dim = 8;
  std::size_t depth = 2;      // Mamba blocks; 0 disables the stack
  std::size_t state_dim = 4;
  PaddingMode padding = PaddingMode::kLearnable;
  MambaPlacement placement = MambaPlacement::kReplace;
  bool use_bypass = true;
  BypassConfig bypass{.rank = 4};
  bool freeze_backbone = false;
  void validate() const;
};

// Sinusoidal timestep features, [dim].
Tensor timestep_embedding(std::size_t t, std::size_t dim);

// Small inflated video denoiser predicting eps:
//   conv_in -> +time/condition modulation -> SiLU -> residual conv_mid
//   -> [temporal attention] -> Mamba stack -> residual sparse-causal attention
//   -> conv_out
// All spatial convolutions are 1x3x3. Parameters draw from `rng` in a fixed
// order independent of the bypass and placement settings.
class ToyDenoiser {
 public:
  ToyDenoiser(const DenoiserConfig& cfg, Rng& rng);

  // z_t[T, channels, H, W], c[cond_dim] -> eps_hat with the shape of z_t.
  Var forward(const Var& z_t, std::size_t t, const Tensor& c) const;
  Tensor predict(const Tensor& z_t, std::size_t t, const Tensor& c) const;

  // Trainable entries only (respects freeze_backbone and bypass freezing).
  NamedParams collect() const;
  // Every tensor that defines the model, trainable or not.
  NamedParams collect_all() const;
  TensorArchive checkpoint() const;
  // Overwrites values by name; every name must exist with a matching shape.
  void load(const TensorArchive& archive);

  // Appends a freshly initialised Mamba block to the stack.
  void append_mamba_block(Rng& rng);

  const DenoiserConfig& config() const { return cfg_; }
  std::size_t mamba_depth() const { return stack_ ? stack_->depth() : 0; }
  const AttentionLayer& spatial_attention() const { return attn_; }

 private:
  MambaBlockConfig block_config() const;
  Var param(Tensor t) const;

  DenoiserConfig cfg_;
  Var conv_in_w_, conv_in_b_, time_w_, time_b_, cond_w_;
  Var conv_mid_w_, conv_mid_b_, conv_out_w_, conv_out_b_;
  std::optional<AttentionLayer> temporal_;
  std::optional<BlockStack> stack_;
  AttentionLayer attn_;
};

}  // namespace vidmamba
