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

#include "vidmamba/denoiser.hpp"

#include <cmath>
#include <set>

namespace vidmamba {
namespace {

Tensor conv_weight(std::size_t cout, std::size_t cin, Rng& rng) {
  return rng.normal_tensor({cout, cin, 3, 3}, 1.0 / std::sqrt(9.0 * static_cast<double>(cin)));
}

Tensor as_row(const Tensor& v) { return v.reshaped({1, v.size()}); }

}  // namespace

std::string_view to_string(MambaPlacement p) {
  return p == MambaPlacement::kReplace ? "replace" : "insert-after";
}

MambaPlacement parse_placement(std::string_view name) {
  if (name == "replace") return MambaPlacement::kReplace;
  if (name == "insert-after") return MambaPlacement::kInsertAfter;
  throw ConfigError("unknown Mamba placement '" + std::string(name) + "'");
}

void DenoiserConfig::validate() const {
  if (channels == 0 || width == 0 || cond_dim == 0 || state_dim == 0) {
    throw ConfigError("denoiser: widths must be positive");
  }
  if (time_dim < 2 || time_dim % 2) throw ConfigError("denoiser: time_dim must be even");
  if (use_bypass && (bypass.rank == 0 || bypass.rank >= width)) {
    throw ConfigError("denoiser: bypass rank " + std::to_string(bypass.rank) +
                      " must satisfy 1 <= k < width " + std::to_string(width));
  }
  if (placement == MambaPlacement::kReplace && depth == 0) {
    throw ConfigError("denoiser: replace placement needs at least one Mamba block");
  }
}

Tensor timestep_embedding(std::size_t t, std::size_t dim) {
  const std::size_t half = dim / 2;
  Tensor e({dim});
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(1000.0, -static_cast<double>(i) / static_cast<double>(half));
    const double a = static_cast<double>(t) * freq;
    e[2 * i] = std::sin(a);
    e[2 * i + 1] = std::cos(a);
  }
  return e;
}

Var ToyDenoiser::param(Tensor t) const {
  return cfg_.freeze_backbone ? Var::constant(std::move(t)) : Var::parameter(std::move(t));
}

MambaBlockConfig ToyDenoiser::block_config() const {
  MambaBlockConfig b;
  b.channels = cfg_.width;
  b.state_dim = cfg_.state_dim;
  b.padding = cfg_.padding;
  return b;
}

ToyDenoiser::ToyDenoiser(const DenoiserConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      attn_(AttnParams::init(cfg.width, rng), !cfg.freeze_backbone) {
  const std::size_t f = cfg_.width;
  conv_in_w_ = param(conv_weight(f, cfg_.channels, rng));
  conv_in_b_ = param(Tensor({f}));
  time_w_ = param(rng.normal_tensor({cfg_.time_dim, f}, 1.0 / std::sqrt(double(cfg_.time_dim))));
  time_b_ = param(Tensor({f}));
  cond_w_ = param(rng.normal_tensor({cfg_.cond_dim, f}, 1.0));
  conv_mid_w_ = param(conv_weight(f, f, rng));
  conv_mid_b_ = param(Tensor({f}));
  conv_out_w_ = param(conv_weight(cfg_.channels, f, rng));
  conv_out_b_ = param(Tensor({cfg_.channels}));
  const AttnParams temporal_base = AttnParams::init(f, rng);
  if (cfg_.placement == MambaPlacement::kInsertAfter) {
    temporal_.emplace(temporal_base, !cfg_.freeze_backbone);
  }
  Rng mamba_rng(rng.next_u64());
  if (cfg_.depth > 0) stack_.emplace(block_config(), cfg_.depth, mamba_rng);
  if (cfg_.use_bypass) attn_.attach_bypass(cfg_.bypass);
}

Var ToyDenoiser::forward(const Var& z_t, std::size_t t, const Tensor& c) const {
  const Shape& s = z_t.shape();
  if (s.size() != 4 || s[1] != cfg_.channels) {
    throw DimensionError("denoiser: input " + shape_string(s) + " needs [T, " +
                         std::to_string(cfg_.channels) + ", H, W]");
  }
  if (c.size() != cfg_.cond_dim) throw DimensionError("denoiser: condition size mismatch");
  const Var temb = Var::constant(as_row(timestep_embedding(t, cfg_.time_dim)));
  const Var cond = Var::constant(as_row(c));
  Var mod = ad::add(ad::add_row_bias(ad::matmul(temb, time_w_), time_b_), ad::matmul(cond, cond_w_));
  mod = ad::reshape(mod, {cfg_.width});

  Var h = ad::conv_frames(z_t, conv_in_w_, conv_in_b_);
  h = ad::silu(ad::add_channel_bias(h, mod));
  h = ad::add(h, ad::silu(ad::conv_frames(h, conv_mid_w_, conv_mid_b_)));
  if (temporal_) h = ad::add(h, temporal_->temporal(h));
  if (stack_) h = stack_->forward(h);
  h = ad::add(h, attn_.sparse_causal(h));
  return ad::conv_frames(h, conv_out_w_, conv_out_b_);
}

Tensor ToyDenoiser::predict(const Tensor& z_t, std::size_t t, const Tensor& c) const {
  return forward(Var::constant(z_t), t, c).value();
}

NamedParams ToyDenoiser::collect_all() const {
  NamedParams out{{"conv_in.w", conv_in_w_},   {"conv_in.b", conv_in_b_},
                  {"time.w", time_w_},         {"time.b", time_b_},
                  {"cond.w", cond_w_},         {"conv_mid.w", conv_mid_w_},
                  {"conv_mid.b", conv_mid_b_}, {"conv_out.w", conv_out_w_},
                  {"conv_out.b", conv_out_b_}};
  if (temporal_) temporal_->collect_all("temporal_attn.", out);
  if (stack_) stack_->collect("mamba.", out);
  attn_.collect_all("attn.", out);
  return out;
}

NamedParams ToyDenoiser::collect() const {
  NamedParams out;
  for (auto& entry : collect_all()) {
    if (entry.second.requires_grad()) out.push_back(std::move(entry));
  }
  return out;
}

TensorArchive ToyDenoiser::checkpoint() const {
  TensorArchive a;
  for (const auto& [name, v] : collect_all()) a.emplace(name, v.value());
  return a;
}

void ToyDenoiser::load(const TensorArchive& archive) {
  NamedParams all = collect_all();
  std::set<std::string> known;
  for (auto& [name, v] : all) {
    known.insert(name);
    const auto it = archive.find(name);
    if (it == archive.end()) throw ConfigError("checkpoint is missing '" + name + "'");
    if (it->second.shape() != v.shape()) {
      throw DimensionError("checkpoint entry '" + name + "' has shape " +
                           shape_string(it->second.shape()) + ", model expects " +
                           shape_string(v.shape()));
    }
  }
  for (const auto& [name, t] : archive) {
    if (!known.count(name)) throw ConfigError("checkpoint has unknown entry '" + name + "'");
  }
  for (auto& [name, v] : all) v.mutable_value() = archive.at(name);
}

void ToyDenoiser::append_mamba_block(Rng& rng) {
  std::vector<MambaBlock> blocks;
  if (stack_) blocks = stack_->blocks();
  blocks.emplace_back(block_config(), rng);
  stack_.emplace(std::move(blocks));
  cfg_.depth = stack_->depth();
}

}  // namespace vidmamba
