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

#include "vidmamba/harness/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "vidmamba/bypass.hpp"
#include "vidmamba/denoiser.hpp"
#include "vidmamba/diffusion.hpp"
#include "vidmamba/grad_check.hpp"
#include "vidmamba/linalg.hpp"
#include "vidmamba/ssm.hpp"
#include "vidmamba/temporal_mamba.hpp"
#include "vidmamba/video_scan.hpp"

namespace vidmamba::harness {
namespace {

constexpr double kFdStep = 1e-4;

CheckResult below(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value < threshold, value, threshold, std::move(detail)};
}

SsmParams random_ssm(Rng& rng, std::size_t n) {
  SsmParams p;
  p.a = rng.normal_tensor({n, n}, 0.5 / std::sqrt(static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) p.a.at(i, i) -= 1.0;
  p.b = rng.normal_tensor({n, 1});
  p.c = rng.normal_tensor({1, n});
  p.delta = rng.uniform(0.05, 0.5);
  return discretize_zoh(p);
}

// out(t, c, h, w) = x(t', c, h', w') straight from the flip definitions.
Tensor flip_oracle(const Tensor& x, int branch) {
  const std::size_t T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out(x.shape());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          const std::size_t ts = (branch & 1) ? T - 1 - t : t;
          const std::size_t hs = (branch & 2) ? H - 1 - h : h;
          const std::size_t ws = (branch & 2) ? W - 1 - w : w;
          out.at(t, c, h, w) = x.at(ts, c, hs, ws);
        }
  return out;
}

MambaBlock active_block(std::size_t channels, PaddingMode padding, Rng& rng) {
  MambaBlockConfig cfg;
  cfg.channels = channels;
  cfg.inner = 3;
  cfg.state_dim = 3;
  cfg.padding = padding;
  MambaBlockParams p = MambaBlockParams::init(cfg, rng);
  p.w_out = rng.normal_tensor(p.w_out.shape(), 0.5);
  p.conv_b = rng.normal_tensor(p.conv_b.shape(), 0.1);
  return MambaBlock(cfg, p);
}

CheckResult grad_result(std::string name, const std::vector<ParamCheck>& checks,
                        double threshold) {
  const auto it = std::max_element(checks.begin(), checks.end(),
                                   [](const ParamCheck& a, const ParamCheck& b) {
                                     return a.max_rel_error < b.max_rel_error;
                                   });
  std::string detail = std::to_string(checks.size()) + " tensors";
  if (it != checks.end()) detail += ", worst " + it->name;
  return below(std::move(name), worst(checks), threshold, detail);
}

}  // namespace

CheckResult check_recurrence_conv(std::uint64_t seed, std::size_t cases, std::size_t max_len) {
  double worst_dev = 0.0;
  for (std::size_t s = 0; s < cases; ++s) {
    Rng rng(seed, 1000 + s);
    const SsmParams p = random_ssm(rng, 1 + rng.below(4));
    const std::size_t m = 1 + rng.below(max_len);
    std::vector<double> x(m);
    for (double& v : x) v = rng.normal();
    const auto y_rec = scan_sequential(p, x);
    const auto y_conv = causal_conv(conv_kernel(p, m), x);
    for (std::size_t i = 0; i < m; ++i) worst_dev = std::max(worst_dev, std::abs(y_rec[i] - y_conv[i]));
  }
  return below("recurrence_conv", worst_dev, 1e-10, std::to_string(cases) + " random SSMs");
}

CheckResult check_parallel_scan(std::uint64_t seed, const std::vector<std::size_t>& lengths) {
  double worst_rel = 0.0;
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    Rng rng(seed, 2000 + li);
    const std::size_t len = lengths[li];
    std::vector<AffineMap> maps(len);
    const double a = -rng.uniform(0.5, 4.0);
    for (AffineMap& m : maps) {
      const double dt = rng.uniform(1e-3, 0.1);
      m = {std::exp(dt * a), dt * rng.normal()};
    }
    const auto seq = scan_sequential(maps);
    const auto par = scan_parallel(maps);
    double scale = 0.0, dev = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      scale = std::max(scale, std::abs(seq[i]));
      dev = std::max(dev, std::abs(seq[i] - par[i]));
    }
    worst_rel = std::max(worst_rel, dev / std::max(scale, 1e-300));

    const SsmParams p = random_ssm(rng, 4);
    std::vector<double> x(len);
    for (double& v : x) v = rng.normal();
    const auto ys = scan_sequential(p, x);
    const auto yp = scan_parallel(p, x);
    scale = dev = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      scale = std::max(scale, std::abs(ys[i]));
      dev = std::max(dev, std::abs(ys[i] - yp[i]));
    }
    worst_rel = std::max(worst_rel, dev / std::max(scale, 1e-300));
  }
  std::string detail = "lengths";
  for (std::size_t l : lengths) detail += " " + std::to_string(l);
  return below("parallel_scan", worst_rel, 1e-8, detail);
}

CheckResult check_flip_group(std::uint64_t seed) {
  Rng rng(seed, 3000);
  const Tensor x = rng.normal_tensor({3, 2, 3, 4});
  std::size_t mismatches = 0;
  for (int i = 0; i < 4; ++i) {
    if (flip(x, i) != flip_oracle(x, i)) ++mismatches;
    if (unflip(flip(x, i), i) != x) ++mismatches;
    for (int j = 0; j < 4; ++j) {
      if (flip(flip(x, i), j) != flip(x, i ^ j)) ++mismatches;
    }
    const ScanOrder order = kAllScanOrders[static_cast<std::size_t>(i)];
    const Flattened via_order = flatten(x, order);
    if (flatten(flip(x, i), ScanOrder::kSpatialFwdTemporalFwd).tokens != via_order.tokens) {
      ++mismatches;
    }
    if (unflatten(via_order.tokens, via_order.layout) != x) ++mismatches;
  }
  return {"flip_group", mismatches == 0, static_cast<double>(mismatches), 0.5,
          "composition table, index oracle, scan-order correspondence"};
}

CheckResult check_fuse(std::uint64_t seed) {
  Rng rng(seed, 3100);
  std::array<Tensor, 4> branches;
  for (Tensor& b : branches) b = rng.normal_tensor({3, 2, 4, 5});
  const Tensor fused = fuse(branches);
  Tensor oracle = branches[0];
  for (int i = 1; i < 4; ++i) oracle += flip_oracle(branches[static_cast<std::size_t>(i)], i);
  const double dev = max_abs_diff(fused, oracle);

  std::array<Tensor, 4> aligned;
  const Tensor x = rng.normal_tensor({3, 2, 4, 5});
  for (int i = 0; i < 4; ++i) aligned[static_cast<std::size_t>(i)] = flip_oracle(x, i);
  const double dev4 = max_abs_diff(fuse(aligned), 4.0 * x);
  const double value = std::max(dev, dev4);
  return {"fuse", value == 0.0, value, 0.0, "permute-then-sum oracle, exact"};
}

CheckResult check_flip_equivariance(std::uint64_t seed) {
  Rng rng(seed, 3200);
  const MambaBlock block = active_block(2, PaddingMode::kLearnable, rng);
  const Tensor x = rng.normal_tensor({3, 2, 4, 4});
  const Tensor y = block.forward(Var::constant(x)).value();
  double dev = 0.0;
  for (int j = 1; j < 4; ++j) {
    const Tensor lhs = flip(y, j);
    const Tensor rhs = block.forward(Var::constant(flip(x, j))).value();
    dev = std::max(dev, max_abs_diff(lhs, rhs));
  }
  return below("fuse_flip_equivariance", dev, 1e-9, "block(flip_j x) vs flip_j block(x)");
}

std::vector<CheckResult> check_gradients(std::uint64_t seed, bool include_denoiser) {
  std::vector<CheckResult> out;
  {
    Rng rng(seed, 4000);
    SelectiveVars p = SelectiveVars::from(SelectiveParams::init(3, 2, rng));
    p.b_b.mutable_value() = rng.normal_tensor({2}, 0.3);
    p.b_c.mutable_value() = rng.normal_tensor({2}, 0.3);
    const Var x = Var::parameter(rng.normal_tensor({8, 3}));
    const Tensor w = rng.normal_tensor({8, 3});
    NamedParams ps;
    p.collect("", ps);
    ps.emplace_back("x", x);
    out.push_back(grad_result("grad_ssm_core",
                              grad_check_params([&] { return ad::weighted_sum(ad::selective_scan(x, p), w); }, ps),
                              1e-4));
  }
  {
    Rng rng(seed, 4100);
    const Var video = Var::parameter(rng.normal_tensor({2, 2, 2, 3}));
    const Var theta = Var::parameter(rng.normal_tensor({2}));
    const ScanLayout layout = make_layout(2, 4, 5, ScanOrder::kSpatialRevTemporalRev);
    const Tensor w = rng.normal_tensor({layout.length(), 2});
    auto loss = [&] {
      const Var padded = ad::pad_frames(ad::flip(video, 3), theta);
      const Var tokens = ad::flatten(padded, layout);
      return ad::weighted_sum(ad::mul(tokens, tokens), w);
    };
    out.push_back(grad_result("grad_video_scan",
                              grad_check_params(loss, {{"video", video}, {"theta_frame", theta}}),
                              1e-4));
  }
  {
    Rng rng(seed, 4200);
    const MambaBlock block = active_block(2, PaddingMode::kLearnable, rng);
    const BlockStack stack({block, active_block(2, PaddingMode::kLearnable, rng)});
    const Tensor x = rng.normal_tensor({2, 2, 2, 3});
    const Tensor w = rng.normal_tensor({2, 2, 2, 3});
    NamedParams ps;
    stack.collect("", ps);
    out.push_back(grad_result(
        "grad_temporal_mamba",
        grad_check_params([&] { return ad::weighted_sum(stack.forward(Var::constant(x)), w); }, ps,
                          kFdStep),
        1e-4));
  }
  {
    Rng rng(seed, 4300);
    const AttnParams base = AttnParams::init(6, rng);
    AttentionLayer layer(base, false);
    BypassAttnParams bp{rng.normal_tensor({6, 3}, 0.5), rng.normal_tensor({6, 3}, 0.5), 0.4};
    layer.attach_bypass(bp, PhiMode::kLearnable);
    AttentionLayer full(AttnParams::init(6, rng), true);
    const Tensor video = rng.normal_tensor({3, 6, 2, 2});
    const Tensor w = rng.normal_tensor({3, 6, 2, 2});
    NamedParams ps;
    layer.collect("bypass.", ps);
    full.collect("base.", ps);
    auto loss = [&] {
      const Var v = Var::constant(video);
      return ad::weighted_sum(ad::add(layer.sparse_causal(v), full.temporal(v)), w);
    };
    out.push_back(grad_result("grad_bypass_attention", grad_check_params(loss, ps), 1e-4));
  }
  if (include_denoiser) {
    Rng rng(seed, 4400);
    DenoiserConfig cfg;
    cfg.width = 8;
    cfg.bypass.rank = 4;
    cfg.bypass.phi_mode = PhiMode::kLearnable;
    const ToyDenoiser model(cfg, rng);
    NamedParams ps = model.collect();
    for (auto& [name, v] : ps) {
      if (name.ends_with("w_out")) v.mutable_value() = rng.normal_tensor(v.shape(), 0.3);
    }
    const DiffusionSchedule schedule;
    const Tensor z0 = rng.uniform_tensor({4, cfg.channels, 8, 8}, 0.0, 1.0);
    const Tensor eps = rng.normal_tensor(z0.shape());
    Tensor c({cfg.cond_dim});
    c[1] = 1.0;
    const EpsModel f = [&model](const Var& z, std::size_t t, const Tensor& cc) {
      return model.forward(z, t, cc);
    };
    out.push_back(grad_result(
        "grad_denoiser",
        grad_check_params([&] { return epsilon_loss(f, z0, c, schedule, 300, eps); }, ps, 1e-3,
                          Stencil::kFourthOrder),
        1e-3));
  }
  return out;
}

CheckResult check_svd_init(std::uint64_t seed, std::size_t trials, std::size_t competitors) {
  double tail_dev = 0.0, exact_err = 0.0;
  std::size_t losses = 0;
  for (std::size_t tr = 0; tr < trials; ++tr) {
    Rng rng(seed, 5000 + tr);
    const std::size_t d = 8, k = 4;
    const AttnParams base = AttnParams::init(d, rng);
    const BypassAttnParams bp = svd_init(base, k);
    const double err = factor_error(base, bp);
    const Tensor m = matmul_nt(base.w_q, base.w_k);
    const Svd f = svd(m);
    double tail = 0.0;
    for (std::size_t i = k; i < d; ++i) tail += f.s[i] * f.s[i];
    tail_dev = std::max(tail_dev, std::abs(err - std::sqrt(tail)));
    for (std::size_t c = 0; c < competitors; ++c) {
      Tensor approx;
      if (c % 2 == 0) {
        approx = matmul_nt(rng.normal_tensor({d, k}), rng.normal_tensor({d, k}));
      } else {
        // Projection of m onto a random k-dimensional row space: a strong rank-k rival.
        const Tensor basis = orthonormalize_columns(rng.normal_tensor({d, k}));
        approx = matmul_nt(matmul(m, basis), basis);
      }
      if (frobenius_norm(approx - m) < err) ++losses;
    }
    const std::size_t r = 1 + rng.below(k);
    AttnParams low = base;
    low.w_q = matmul(rng.normal_tensor({d, r}), rng.normal_tensor({r, d}));
    exact_err = std::max(exact_err, factor_error(low, svd_init(low, k)));
  }
  const double value = std::max(tail_dev, exact_err);
  std::ostringstream detail;
  detail << "tail dev " << tail_dev << ", below-rank err " << exact_err << ", competitor wins "
         << losses;
  return {"svd_optimality", value <= 1e-9 && losses == 0, value, 1e-9, detail.str()};
}

CheckResult check_jl(std::uint64_t seed, std::size_t trials, std::size_t d, std::size_t k,
                     double eps) {
  const JlResult r = jl_verify(d, k, eps, trials, seed);
  std::ostringstream detail;
  detail << r.failures << "/" << r.trials << " failures, bound " << r.bound << " + slack "
         << r.slack << ", inner-product reading rate " << r.failure_rate_inner_product;
  return {"jl_bound", r.within_bound, r.failure_rate, r.bound + r.slack, detail.str()};
}

CheckResult check_bypass_limits(std::uint64_t seed) {
  Rng rng(seed, 6000);
  const std::size_t d = 10, k = 4, L = 7;
  const AttnParams base = AttnParams::init(d, rng);
  const Tensor xq = rng.normal_tensor({L, d}), xk = rng.normal_tensor({L + 2, d});
  const Tensor xv = rng.normal_tensor({L + 2, d});
  BypassAttnParams bp{rng.normal_tensor({d, k}), rng.normal_tensor({d, k}), 1.0};
  const bool identical = mixed_attention(xq, xk, xv, base, bp) == attention(xq, xk, xv, base);

  AttentionLayer plain(base, false), mixed(base, false);
  mixed.attach_bypass(bp, PhiMode::kFixed);
  const Var video = Var::constant(rng.normal_tensor({3, d, 2, 2}));
  const bool identical_video = plain.sparse_causal(video).value() == mixed.sparse_causal(video).value();

  AttnParams low = base;
  low.w_q = matmul(rng.normal_tensor({d, k - 1}), rng.normal_tensor({k - 1, d}));
  const Tensor ref = attention(xq, xk, xv, low);
  double dev = 0.0;
  for (double phi : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    dev = std::max(dev, max_abs_diff(mixed_attention(xq, xk, xv, low, svd_init(low, k, phi)), ref));
  }
  std::ostringstream detail;
  detail << "phi=1 bit-identical: " << (identical && identical_video ? "yes" : "no")
         << ", exact-rank max dev " << dev;
  return {"bypass_limits", identical && identical_video && dev <= 1e-9, dev, 1e-9, detail.str()};
}

CheckResult check_param_audit(std::size_t d, std::size_t k) {
  const ParamAudit a = param_audit(d, k);
  Rng rng(7000);
  AttentionLayer layer(AttnParams::init(d, rng), false);
  layer.attach_bypass(BypassAttnParams{Tensor({d, k}), Tensor({d, k}), 0.5}, PhiMode::kFixed);
  NamedParams trainable, all;
  layer.collect("", trainable);
  layer.collect_all("", all);
  std::uint64_t live = 0, frozen_qk = 0;
  for (const auto& [name, v] : trainable) live += v.value().size();
  for (const auto& [name, v] : all) {
    if (name == "w_q" || name == "w_k") frozen_qk += v.value().size();
  }
  const bool exact = live == a.trainable_per_layer && frozen_qk == a.full_per_layer &&
                     a.trainable_per_layer * d == a.full_per_layer * k;
  std::ostringstream detail;
  detail << "d=" << d << " k=" << k << ": " << a.trainable_per_layer << " / " << a.full_per_layer
         << " = " << 100.0 * a.ratio << "%";
  return {"param_audit", exact, a.ratio, static_cast<double>(k) / static_cast<double>(d),
          detail.str()};
}

namespace {

struct Stage {
  std::vector<std::string> names;
  std::function<std::vector<CheckResult>(std::uint64_t)> run;
};

const std::vector<Stage>& stages() {
  using R = std::vector<CheckResult>;
  static const std::vector<Stage> s{
      {{"recurrence_conv"}, [](std::uint64_t seed) { return R{check_recurrence_conv(seed)}; }},
      {{"parallel_scan"}, [](std::uint64_t seed) { return R{check_parallel_scan(seed)}; }},
      {{"flip_group"}, [](std::uint64_t seed) { return R{check_flip_group(seed)}; }},
      {{"fuse"}, [](std::uint64_t seed) { return R{check_fuse(seed)}; }},
      {{"fuse_flip_equivariance"}, [](std::uint64_t seed) { return R{check_flip_equivariance(seed)}; }},
      {{"grad_ssm_core", "grad_video_scan", "grad_temporal_mamba", "grad_bypass_attention",
        "grad_denoiser"},
       [](std::uint64_t seed) { return check_gradients(seed); }},
      {{"svd_optimality"}, [](std::uint64_t seed) { return R{check_svd_init(seed)}; }},
      {{"jl_bound"}, [](std::uint64_t seed) { return R{check_jl(seed, 2000)}; }},
      {{"bypass_limits"}, [](std::uint64_t seed) { return R{check_bypass_limits(seed)}; }},
      {{"param_audit"}, [](std::uint64_t) { return R{check_param_audit()}; }},
  };
  return s;
}

}  // namespace

std::vector<std::string> verify_check_names() {
  std::vector<std::string> out;
  for (const Stage& st : stages()) out.insert(out.end(), st.names.begin(), st.names.end());
  return out;
}

std::vector<CheckResult> run_verify(std::uint64_t seed, const std::vector<std::string>& only) {
  const auto known = verify_check_names();
  for (const auto& name : only) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ArgumentError("unknown check '" + name + "'");
    }
  }
  const auto wanted = [&](const std::string& name) {
    return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
  };
  std::vector<CheckResult> out;
  for (const Stage& st : stages()) {
    if (std::none_of(st.names.begin(), st.names.end(), wanted)) continue;
    for (CheckResult& r : st.run(seed)) {
      if (wanted(r.name)) out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace vidmamba::harness
