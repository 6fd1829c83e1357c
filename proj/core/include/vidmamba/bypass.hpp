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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vidmamba/attention.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/temporal_mamba.hpp"

namespace vidmamba {

// Frozen single-head projections; tokens are rows, so Q = X W_Q.
struct AttnParams {
  Tensor w_q, w_k, w_v;  // d x d

  std::size_t width() const { return w_q.dim(0); }
  static AttnParams init(std::size_t d, Rng& rng);
};

// Rank-k stand-ins for W_Q, W_K plus the map mixing weight.
struct BypassAttnParams {
  Tensor w_q_low;  // d x k
  Tensor w_k_low;  // d x k
  double phi = 0.5;

  std::size_t rank() const { return w_q_low.dim(1); }
  std::size_t width() const { return w_q_low.dim(0); }
};

void validate(const AttnParams& base);
void validate(const BypassAttnParams& bp);

// (X_q W_Q)(X_k W_K)^T, pre-softmax.
Tensor base_map(const Tensor& xq, const Tensor& xk, const AttnParams& base);
// (X_q W'_Q)(X_k W'_K)^T, evaluated in that order so the cost is
// O(L d k + L^2 k) and no d x d product is formed.
Tensor bypass_map(const Tensor& xq, const Tensor& xk, const BypassAttnParams& bp);

// Softmax((X_q W_Q)(X_k W_K)^T / sqrt(d)) X_v W_V.
Tensor attention(const Tensor& xq, const Tensor& xk, const Tensor& xv, const AttnParams& base);

// Softmax(((1 - phi) A' + phi A) / sqrt(d)) X_v W_V. phi outside [0, 1] is
// an ArgumentError.
Tensor mixed_attention(const Tensor& xq, const Tensor& xk, const Tensor& xv,
                       const AttnParams& base, const BypassAttnParams& bp);

// Sparse causal attention over a [T, C, H, W] latent: frame t queries keys
// and values from frames {0, t - 1}; frame 0 attends to itself. C = d.
Tensor sparse_causal_attention(const Tensor& frames, const AttnParams& base);

// W'_Q[:, j] = s_j u_j, W'_K[:, j] = v_j from the SVD of W_Q W_K^T, so
// W'_Q W'_K^T is the best rank-k approximation of W_Q W_K^T.
BypassAttnParams svd_init(const AttnParams& base, std::size_t k, double phi = 0.5);

// ||W'_Q W'_K^T - W_Q W_K^T||_F.
double factor_error(const AttnParams& base, const BypassAttnParams& bp);

enum class JlProjection {
  kGaussian,     // i.i.d. N(0, 1/k) entries
  kOrthonormal,  // Gaussian draw orthonormalized (requires k == d)
};

struct JlResult {
  std::size_t d = 0, k = 0, trials = 0;
  double eps = 0.0;
  std::uint64_t failures = 0;  // |z R R^T y - z y| > eps ||z|| ||y||
  std::uint64_t failures_inner_product = 0;  // same, relative to |z y| instead
  double failure_rate = 0.0;
  double failure_rate_inner_product = 0.0;
  double bound = 0.0;  // 2 exp(-(eps^2 - eps^3) k / 4)
  double slack = 0.0;  // 3 sigma of a Binomial(trials, min(bound, 1)) rate
  bool within_bound = false;
};

double jl_bound(std::size_t k, double eps);

// Monte-Carlo check of the random-projection inner-product bound. Trial i
// draws y, z ~ N(0, I_d) and R from substream i of `seed`, so the result is
// independent of worker count.
JlResult jl_verify(std::size_t d, std::size_t k, double eps, std::size_t trials,
                   std::uint64_t seed, JlProjection projection = JlProjection::kGaussian);

struct ParamAudit {
  std::size_t d = 0, k = 0, layers = 0;
  std::uint64_t trainable_per_layer = 0;  // 2 d k
  std::uint64_t full_per_layer = 0;       // 2 d^2
  std::uint64_t trainable_total = 0;
  std::uint64_t full_total = 0;
  double ratio = 0.0;  // trainable / full = k / d
};

ParamAudit param_audit(std::size_t d, std::size_t k, std::size_t layers = 1);

enum class PhiMode { kFixed, kLearnable };

std::string_view to_string(PhiMode mode);
PhiMode parse_phi_mode(std::string_view name);

struct BypassConfig {
  std::size_t rank = 12;
  double phi = 0.5;
  PhiMode phi_mode = PhiMode::kFixed;
};

// Graph-level attention layer. The base projections are parameters only when
// `base_trainable`; with a bypass attached they stay frozen and only the
// low-rank factors (and a learnable phi, stored as a logit) train.
class AttentionLayer {
 public:
  AttentionLayer(const AttnParams& base, bool base_trainable);

  void attach_bypass(const BypassAttnParams& bp, PhiMode mode);
  void attach_bypass(const BypassConfig& cfg);
  bool has_bypass() const { return static_cast<bool>(w_q_low_); }
  double phi() const;

  // Score terms for queries xq and keys xk: bypass first, then base.
  Var attend(const Var& xq, const Var& xk, const Var& xv, const KeyGroups& groups) const;
  // Video [T, C, H, W] -> same shape.
  Var sparse_causal(const Var& video) const;
  Var temporal(const Var& video) const;

  AttnParams base() const;
  std::optional<BypassAttnParams> bypass() const;
  // Trainable tensors only.
  void collect(const std::string& prefix, NamedParams& out) const;
  // Every tensor, frozen or not (checkpoints).
  void collect_all(const std::string& prefix, NamedParams& out) const;

 private:
  Var video_attention(const Var& video, const KeyGroups& groups) const;

  Var w_q_, w_k_, w_v_;
  Var w_q_low_, w_k_low_;
  Var phi_;        // fixed phi as a constant
  Var phi_logit_;  // learnable phi = sigmoid(logit)
};

}  // namespace vidmamba
