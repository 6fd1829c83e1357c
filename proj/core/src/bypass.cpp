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

#include "vidmamba/bypass.hpp"

#include <atomic>
#include <cmath>

#include "vidmamba/linalg.hpp"
#include "vidmamba/parallel.hpp"

namespace vidmamba {
namespace {

void require_phi(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) {
    throw ArgumentError("mixing weight phi must lie in [0, 1], got " + std::to_string(phi));
  }
}

double inv_sqrt(std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

std::vector<std::size_t> frame_major_index(const Shape& s) {
  // video[T, C, H, W] -> tokens[T * H * W, C]
  const std::size_t frames = s[0], channels = s[1], plane = s[2] * s[3];
  std::vector<std::size_t> idx(frames * plane * channels);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < channels; ++c)
        idx[(t * plane + p) * channels + c] = (t * channels + c) * plane + p;
  return idx;
}

std::vector<std::size_t> video_index(const Shape& s) {
  const std::size_t frames = s[0], channels = s[1], plane = s[2] * s[3];
  std::vector<std::size_t> idx(frames * plane * channels);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t p = 0; p < plane; ++p)
        idx[(t * channels + c) * plane + p] = (t * plane + p) * channels + c;
  return idx;
}

}  // namespace

AttnParams AttnParams::init(std::size_t d, Rng& rng) {
  const double s = inv_sqrt(d);
  return {rng.normal_tensor({d, d}, s), rng.normal_tensor({d, d}, s),
          rng.normal_tensor({d, d}, s)};
}

void validate(const AttnParams& base) {
  const std::size_t d = base.w_q.rank() == 2 ? base.w_q.dim(0) : 0;
  for (const Tensor* w : {&base.w_q, &base.w_k, &base.w_v}) {
    if (w->shape() != Shape{d, d} || d == 0) {
      throw DimensionError("attention projections must be square d x d");
    }
    if (!w->all_finite()) throw NumericError("attention projection has non-finite entries");
  }
}

void validate(const BypassAttnParams& bp) {
  if (bp.w_q_low.rank() != 2 || bp.w_q_low.shape() != bp.w_k_low.shape()) {
    throw DimensionError("bypass factors must both be d x k");
  }
  if (bp.rank() == 0 || bp.rank() >= bp.width()) {
    throw ArgumentError("bypass rank k must satisfy 1 <= k < d, got k=" +
                        std::to_string(bp.rank()) + " d=" + std::to_string(bp.width()));
  }
  require_phi(bp.phi);
}

Tensor base_map(const Tensor& xq, const Tensor& xk, const AttnParams& base) {
  validate(base);
  return matmul_nt(matmul(xq, base.w_q), matmul(xk, base.w_k));
}

Tensor bypass_map(const Tensor& xq, const Tensor& xk, const BypassAttnParams& bp) {
  validate(bp);
  return matmul_nt(matmul(xq, bp.w_q_low), matmul(xk, bp.w_k_low));
}

Tensor attention(const Tensor& xq, const Tensor& xk, const Tensor& xv, const AttnParams& base) {
  AttentionLayer layer(base, false);
  return layer
      .attend(Var::constant(xq), Var::constant(xk), Var::constant(xv),
              KeyGroups::dense(xq.dim(0), xk.dim(0)))
      .value();
}

Tensor mixed_attention(const Tensor& xq, const Tensor& xk, const Tensor& xv,
                       const AttnParams& base, const BypassAttnParams& bp) {
  require_phi(bp.phi);
  AttentionLayer layer(base, false);
  layer.attach_bypass(bp, PhiMode::kFixed);
  return layer
      .attend(Var::constant(xq), Var::constant(xk), Var::constant(xv),
              KeyGroups::dense(xq.dim(0), xk.dim(0)))
      .value();
}

Tensor sparse_causal_attention(const Tensor& frames, const AttnParams& base) {
  if (frames.rank() != 4 || frames.dim(0) < 1) {
    throw DimensionError("sparse_causal_attention: expected [T, C, H, W] with T >= 1");
  }
  AttentionLayer layer(base, false);
  return layer.sparse_causal(Var::constant(frames)).value();
}

BypassAttnParams svd_init(const AttnParams& base, std::size_t k, double phi) {
  validate(base);
  const std::size_t d = base.width();
  if (k < 1 || k >= d) {
    throw ArgumentError("svd_init: rank must satisfy 1 <= k < d, got k=" + std::to_string(k));
  }
  require_phi(phi);
  const Svd f = svd(matmul_nt(base.w_q, base.w_k));
  BypassAttnParams bp;
  bp.w_q_low = Tensor({d, k});
  bp.w_k_low = Tensor({d, k});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      bp.w_q_low.at(i, j) = f.s[j] * f.u.at(i, j);
      bp.w_k_low.at(i, j) = f.v.at(i, j);
    }
  bp.phi = phi;
  return bp;
}

double factor_error(const AttnParams& base, const BypassAttnParams& bp) {
  return frobenius_norm(matmul_nt(bp.w_q_low, bp.w_k_low) - matmul_nt(base.w_q, base.w_k));
}

double jl_bound(std::size_t k, double eps) {
  return 2.0 * std::exp(-(eps * eps - eps * eps * eps) * static_cast<double>(k) / 4.0);
}

JlResult jl_verify(std::size_t d, std::size_t k, double eps, std::size_t trials,
                   std::uint64_t seed, JlProjection projection) {
  if (k < 1 || k > d) throw ArgumentError("jl_verify: need 1 <= k <= d");
  if (!(eps > 0.0 && eps < 1.0)) throw ArgumentError("jl_verify: need 0 < eps < 1");
  if (trials == 0) throw ArgumentError("jl_verify: need at least one trial");
  if (projection == JlProjection::kOrthonormal && k != d) {
    throw ArgumentError("jl_verify: orthonormal projection needs k == d");
  }

  std::atomic<std::uint64_t> failures{0}, failures_ip{0};
  const double sd = 1.0 / std::sqrt(static_cast<double>(k));
  parallel_for(
      trials,
      [&](std::size_t trial) {
        Rng rng(seed, trial);
        std::vector<double> z(d), y(d);
        for (double& v : z) v = rng.normal();
        for (double& v : y) v = rng.normal();
        std::vector<double> zr(k, 0.0), yr(k, 0.0);
        if (projection == JlProjection::kGaussian) {
          // R is consumed row by row; only z R and y R are kept.
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double r = sd * rng.normal();
              zr[j] += z[i] * r;
              yr[j] += y[i] * r;
            }
        } else {
          const Tensor r = orthonormalize_columns(rng.normal_tensor({d, k}));
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              zr[j] += z[i] * r.at(i, j);
              yr[j] += y[i] * r.at(i, j);
            }
        }
        double est = 0.0, exact = 0.0, nz = 0.0, ny = 0.0;
        for (std::size_t j = 0; j < k; ++j) est += zr[j] * yr[j];
        for (std::size_t i = 0; i < d; ++i) {
          exact += z[i] * y[i];
          nz += z[i] * z[i];
          ny += y[i] * y[i];
        }
        const double err = std::abs(est - exact);
        if (err > eps * std::sqrt(nz) * std::sqrt(ny)) ++failures;
        if (err > eps * std::abs(exact)) ++failures_ip;
      },
      64);

  JlResult r;
  r.d = d;
  r.k = k;
  r.eps = eps;
  r.trials = trials;
  r.failures = failures;
  r.failures_inner_product = failures_ip;
  r.failure_rate = static_cast<double>(r.failures) / static_cast<double>(trials);
  r.failure_rate_inner_product =
      static_cast<double>(r.failures_inner_product) / static_cast<double>(trials);
  r.bound = jl_bound(k, eps);
  const double p = std::min(r.bound, 1.0);
  r.slack = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  r.within_bound = r.failure_rate <= r.bound + r.slack;
  return r;
}

ParamAudit param_audit(std::size_t d, std::size_t k, std::size_t layers) {
  if (k == 0 || k > d) throw ArgumentError("param_audit: need 1 <= k <= d");
  ParamAudit a;
  a.d = d;
  a.k = k;
  a.layers = layers;
  a.trainable_per_layer = 2ULL * d * k;
  a.full_per_layer = 2ULL * d * d;
  a.trainable_total = a.trainable_per_layer * layers;
  a.full_total = a.full_per_layer * layers;
  a.ratio = static_cast<double>(a.trainable_per_layer) / static_cast<double>(a.full_per_layer);
  return a;
}

std::string_view to_string(PhiMode mode) {
  return mode == PhiMode::kFixed ? "fixed" : "learnable";
}

PhiMode parse_phi_mode(std::string_view name) {
  if (name == "fixed") return PhiMode::kFixed;
  if (name == "learnable") return PhiMode::kLearnable;
  throw ConfigError("unknown phi mode '" + std::string(name) + "'");
}

AttentionLayer::AttentionLayer(const AttnParams& base, bool base_trainable) {
  validate(base);
  auto make = [base_trainable](const Tensor& t) {
    return base_trainable ? Var::parameter(t) : Var::constant(t);
  };
  w_q_ = make(base.w_q);
  w_k_ = make(base.w_k);
  w_v_ = make(base.w_v);
}

void AttentionLayer::attach_bypass(const BypassAttnParams& bp, PhiMode mode) {
  if (bp.width() != w_q_.shape()[0]) throw DimensionError("bypass width does not match base");
  if (bp.rank() == 0 || bp.rank() >= bp.width()) {
    throw ArgumentError("bypass rank k must satisfy 1 <= k < d");
  }
  require_phi(bp.phi);
  // Base projections freeze once a bypass is attached.
  w_q_ = Var::constant(w_q_.value());
  w_k_ = Var::constant(w_k_.value());
  w_v_ = Var::constant(w_v_.value());
  w_q_low_ = Var::parameter(bp.w_q_low);
  w_k_low_ = Var::parameter(bp.w_k_low);
  if (mode == PhiMode::kFixed) {
    phi_ = Var::constant(Tensor::scalar(bp.phi));
    phi_logit_ = Var();
  } else {
    const double p = std::clamp(bp.phi, 1e-6, 1.0 - 1e-6);
    phi_logit_ = Var::parameter(Tensor::scalar(std::log(p / (1.0 - p))));
    phi_ = Var();
  }
}

void AttentionLayer::attach_bypass(const BypassConfig& cfg) {
  attach_bypass(svd_init(base(), cfg.rank, cfg.phi), cfg.phi_mode);
}

double AttentionLayer::phi() const {
  if (phi_logit_) return 1.0 / (1.0 + std::exp(-phi_logit_.value()[0]));
  if (phi_) return phi_.value()[0];
  return 1.0;
}

Var AttentionLayer::attend(const Var& xq, const Var& xk, const Var& xv,
                           const KeyGroups& groups) const {
  const std::size_t d = w_q_.shape()[0];
  const Var values = ad::matmul(xv, w_v_);
  std::vector<ScoreTerm> terms;
  if (has_bypass()) {
    const Var phi = phi_logit_ ? ad::sigmoid(phi_logit_) : phi_;
    terms.push_back({ad::one_minus(phi), ad::matmul(xq, w_q_low_), ad::matmul(xk, w_k_low_)});
    terms.push_back({phi, ad::matmul(xq, w_q_), ad::matmul(xk, w_k_)});
  } else {
    terms.push_back({Var::constant(Tensor::scalar(1.0)), ad::matmul(xq, w_q_),
                     ad::matmul(xk, w_k_)});
  }
  return ad::grouped_attention(terms, values, groups, inv_sqrt(d));
}

Var AttentionLayer::video_attention(const Var& video, const KeyGroups& groups) const {
  const Shape s = video.shape();
  if (s.size() != 4 || s[1] != w_q_.shape()[0]) {
    throw DimensionError("attention layer: video " + shape_string(s) +
                         " does not match width " + std::to_string(w_q_.shape()[0]));
  }
  const std::size_t tokens = s[0] * s[2] * s[3];
  const Var x = ad::gather(video, frame_major_index(s), {tokens, s[1]});
  const Var out = attend(x, x, x, groups);
  return ad::gather(out, video_index(s), s);
}

Var AttentionLayer::sparse_causal(const Var& video) const {
  const Shape& s = video.shape();
  return video_attention(video, KeyGroups::sparse_causal(s.at(0), s.at(2) * s.at(3)));
}

Var AttentionLayer::temporal(const Var& video) const {
  const Shape& s = video.shape();
  return video_attention(video, KeyGroups::temporal(s.at(0), s.at(2) * s.at(3)));
}

AttnParams AttentionLayer::base() const { return {w_q_.value(), w_k_.value(), w_v_.value()}; }

std::optional<BypassAttnParams> AttentionLayer::bypass() const {
  if (!has_bypass()) return std::nullopt;
  return BypassAttnParams{w_q_low_.value(), w_k_low_.value(), phi()};
}

void AttentionLayer::collect(const std::string& prefix, NamedParams& out) const {
  if (w_q_.requires_grad()) {
    out.emplace_back(prefix + "w_q", w_q_);
    out.emplace_back(prefix + "w_k", w_k_);
    out.emplace_back(prefix + "w_v", w_v_);
  }
  if (has_bypass()) {
    out.emplace_back(prefix + "w_q_low", w_q_low_);
    out.emplace_back(prefix + "w_k_low", w_k_low_);
    if (phi_logit_) out.emplace_back(prefix + "phi_logit", phi_logit_);
  }
}

void AttentionLayer::collect_all(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "w_q", w_q_);
  out.emplace_back(prefix + "w_k", w_k_);
  out.emplace_back(prefix + "w_v", w_v_);
  if (has_bypass()) {
    out.emplace_back(prefix + "w_q_low", w_q_low_);
    out.emplace_back(prefix + "w_k_low", w_k_low_);
    out.emplace_back(prefix + (phi_logit_ ? "phi_logit" : "phi"), phi_logit_ ? phi_logit_ : phi_);
  }
}

}  // namespace vidmamba
