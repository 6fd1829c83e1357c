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

#include "vidmamba/temporal_mamba.hpp"

#include <atomic>
#include <cmath>

#include "vidmamba/linalg.hpp"

namespace vidmamba {
namespace {

std::atomic<bool> g_fuse_fault{false};

void check_params(const MambaBlockConfig& cfg, const MambaBlockParams& p) {
  const std::size_t c = cfg.channels, e = cfg.inner_width(), k = cfg.conv_width;
  const bool ok = p.w_in.shape() == Shape{c, e} && p.w_gate.shape() == Shape{c, e} &&
                  p.conv_w.shape() == Shape{e, k} && p.conv_b.size() == e &&
                  p.w_out.shape() == Shape{e, c} && p.theta.size() == c &&
                  p.ssm.a_log.shape() == Shape{e, cfg.state_dim};
  if (!ok) throw ConfigError("mamba block: parameter shapes do not match the config");
}

}  // namespace

std::string_view to_string(PaddingMode mode) {
  switch (mode) {
    case PaddingMode::kNone: return "none";
    case PaddingMode::kFixedToken: return "fixed-token";
    case PaddingMode::kLearnable: return "learnable";
  }
  return "unknown";
}

PaddingMode parse_padding_mode(std::string_view name) {
  if (name == "none") return PaddingMode::kNone;
  if (name == "fixed-token" || name == "fixed") return PaddingMode::kFixedToken;
  if (name == "learnable") return PaddingMode::kLearnable;
  throw ConfigError("unknown padding mode '" + std::string(name) + "'");
}

MambaBlockParams MambaBlockParams::init(const MambaBlockConfig& cfg, Rng& rng) {
  const std::size_t c = cfg.channels, e = cfg.inner_width(), k = cfg.conv_width;
  if (c == 0 || k == 0 || cfg.state_dim == 0) throw ConfigError("mamba block: zero width");
  MambaBlockParams p;
  const double sc = 1.0 / std::sqrt(static_cast<double>(c));
  p.w_in = rng.normal_tensor({c, e}, sc);
  p.w_gate = rng.normal_tensor({c, e}, sc);
  p.conv_w = rng.normal_tensor({e, k}, 1.0 / std::sqrt(static_cast<double>(k)));
  p.conv_b = Tensor({e});
  p.ssm = SelectiveParams::init(e, cfg.state_dim, rng);
  p.w_out = Tensor({e, c});
  p.theta = rng.normal_tensor({c}, 0.1);
  return p;
}

Tensor causal_depthwise_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || w.dim(0) != x.dim(1) || b.size() != x.dim(1)) {
    throw DimensionError("causal_depthwise_conv: x " + shape_string(x.shape()) + ", w " +
                         shape_string(w.shape()));
  }
  const std::size_t len = x.dim(0), e = x.dim(1), k = w.dim(1);
  Tensor y({len, e});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t ch = 0; ch < e; ++ch) {
      double s = b[ch];
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                   static_cast<std::ptrdiff_t>(k - 1);
        if (src >= 0) s += w[ch * k + j] * x[static_cast<std::size_t>(src) * e + ch];
      }
      y[t * e + ch] = s;
    }
  return y;
}

void set_fuse_fault_for_testing(bool on) { g_fuse_fault = on; }
bool fuse_fault_for_testing() { return g_fuse_fault; }

Tensor fuse(const std::array<Tensor, 4>& branches) {
  Tensor out = branches[0];
  for (int i = 1; i < 4; ++i) {
    require_same_shape(branches[0], branches[i], "fuse");
    Tensor restored = unflip(branches[i], i);
    if (i == 3 && g_fuse_fault) restored *= -1.0;
    out += restored;
  }
  return out;
}

namespace ad {

Var causal_depthwise_conv(const Var& x, const Var& w, const Var& b) {
  Tensor y = vidmamba::causal_depthwise_conv(x.value(), w.value(), b.value());
  return make_op(std::move(y), {x, w, b}, [](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const std::size_t len = xv.dim(0), e = xv.dim(1), k = wv.dim(1);
    Tensor* dx = self.parents[0]->requires_grad ? &self.parents[0]->grad_buffer() : nullptr;
    Tensor* dw = self.parents[1]->requires_grad ? &self.parents[1]->grad_buffer() : nullptr;
    Tensor* db = self.parents[2]->requires_grad ? &self.parents[2]->grad_buffer() : nullptr;
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t ch = 0; ch < e; ++ch) {
        const double g = self.grad[t * e + ch];
        if (db) (*db)[ch] += g;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                     static_cast<std::ptrdiff_t>(k - 1);
          if (src < 0) continue;
          const std::size_t s = static_cast<std::size_t>(src);
          if (dw) (*dw)[ch * k + j] += g * xv[s * e + ch];
          if (dx) (*dx)[s * e + ch] += g * wv[ch * k + j];
        }
      }
  });
}

Var fuse(const std::array<Var, 4>& branches) {
  Var out = branches[0];
  for (int i = 1; i < 4; ++i) {
    require_same_shape(branches[0].value(), branches[i].value(), "fuse");
    Var restored = flip(branches[i], i);
    if (i == 3 && g_fuse_fault) restored = scale(restored, -1.0);
    out = add(out, restored);
  }
  return out;
}

}  // namespace ad

MambaBlock::MambaBlock(const MambaBlockConfig& cfg, Rng& rng)
    : MambaBlock(cfg, MambaBlockParams::init(cfg, rng)) {}

MambaBlock::MambaBlock(const MambaBlockConfig& cfg, const MambaBlockParams& p) : cfg_(cfg) {
  check_params(cfg, p);
  w_in_ = Var::parameter(p.w_in);
  w_gate_ = Var::parameter(p.w_gate);
  conv_w_ = Var::parameter(p.conv_w);
  conv_b_ = Var::parameter(p.conv_b);
  w_out_ = Var::parameter(p.w_out);
  theta_ = Var::parameter(p.theta);
  ssm_ = SelectiveVars::from(p.ssm);
}

Var MambaBlock::branch_forward(const Var& x_padded, int branch) const {
  const Shape& s = x_padded.shape();
  check_input(s);
  const ScanLayout layout = make_layout(s[0], s[2], s[3], ScanOrder::kSpatialFwdTemporalFwd,
                                        cfg_.padding == PaddingMode::kFixedToken);
  const Var tokens = vidmamba::ad::flatten(vidmamba::ad::flip(x_padded, branch), layout);
  const Var u = ad::causal_depthwise_conv(ad::matmul(tokens, w_in_), conv_w_, conv_b_);
  const Var y = ad::selective_scan(ad::silu(u), ssm_);
  const Var gate = ad::silu(ad::matmul(tokens, w_gate_));
  const Var out = ad::matmul(ad::mul(y, gate), w_out_);
  return vidmamba::ad::unflatten(out, layout);
}

void MambaBlock::check_input(const Shape& s) const {
  if (s.size() != 4 || s[1] != cfg_.channels) {
    throw DimensionError("mamba block: input " + shape_string(s) + " does not have " +
                         std::to_string(cfg_.channels) + " channels");
  }
}

Var MambaBlock::pad(const Var& x) const {
  check_input(x.shape());
  if (cfg_.padding == PaddingMode::kLearnable) return vidmamba::ad::pad_frames(x, theta_);
  return x;
}

Var MambaBlock::forward(const Var& x) const {
  const Var xp = pad(x);
  std::array<Var, 4> branches;
  for (int i = 0; i < 4; ++i) branches[i] = branch_forward(xp, i);
  Var fused = ad::fuse(branches);
  if (cfg_.padding == PaddingMode::kLearnable) fused = vidmamba::ad::crop_frames(fused);
  return ad::add(x, fused);
}

MambaBlockParams MambaBlock::snapshot() const {
  return {w_in_.value(),  w_gate_.value(), conv_w_.value(), conv_b_.value(),
          ssm_.snapshot(), w_out_.value(), theta_.value()};
}

void MambaBlock::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "w_in", w_in_);
  out.emplace_back(prefix + "w_gate", w_gate_);
  out.emplace_back(prefix + "conv_w", conv_w_);
  out.emplace_back(prefix + "conv_b", conv_b_);
  ssm_.collect(prefix + "ssm.", out);
  out.emplace_back(prefix + "w_out", w_out_);
  if (cfg_.padding == PaddingMode::kLearnable) out.emplace_back(prefix + "theta_frame", theta_);
}

std::size_t MambaBlock::parameter_count() const {
  NamedParams ps;
  collect("", ps);
  std::size_t n = 0;
  for (const auto& [name, v] : ps) n += v.value().size();
  return n;
}

BlockStack::BlockStack(const MambaBlockConfig& cfg, std::size_t depth, Rng& rng) {
  if (depth < 1) throw ConfigError("block stack depth must be at least 1");
  for (std::size_t i = 0; i < depth; ++i) blocks_.emplace_back(cfg, rng);
}

BlockStack::BlockStack(std::vector<MambaBlock> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("block stack depth must be at least 1");
}

Var BlockStack::forward(const Var& x) const {
  Var h = x;
  for (const MambaBlock& b : blocks_) h = b.forward(h);
  return h;
}

void BlockStack::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(prefix + std::to_string(i) + ".", out);
  }
}

std::size_t BlockStack::parameter_count() const {
  std::size_t n = 0;
  for (const MambaBlock& b : blocks_) n += b.parameter_count();
  return n;
}

}  // namespace vidmamba
