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

#include "vidmamba/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace vidmamba {

DiffusionSchedule::DiffusionSchedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw ArgumentError("schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw ArgumentError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  betas_.resize(steps);
  alpha_bars_.resize(steps + 1);
  alpha_bars_[0] = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas_[i] = beta_start + f * (beta_end - beta_start);
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
  }
}

double DiffusionSchedule::beta(std::size_t t) const {
  if (t < 1 || t > steps()) throw ArgumentError("schedule: t out of range");
  return betas_[t - 1];
}

double DiffusionSchedule::alpha(std::size_t t) const { return 1.0 - beta(t); }

double DiffusionSchedule::alpha_bar(std::size_t t) const {
  if (t > steps()) throw ArgumentError("schedule: t out of range");
  return alpha_bars_[t];
}

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const DiffusionSchedule& s,
                       const Tensor& eps) {
  if (t < 1 || t > s.steps()) {
    throw ArgumentError("forward_diffuse: t=" + std::to_string(t) + " outside 1.." +
                        std::to_string(s.steps()));
  }
  require_same_shape(z0, eps, "forward_diffuse");
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor z = z0;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = a * z0[i] + b * eps[i];
  return z;
}

Noised forward_diffuse(const Tensor& z0, std::size_t t, const DiffusionSchedule& s, Rng& rng) {
  if (t < 1 || t > s.steps()) throw ArgumentError("forward_diffuse: t out of range");
  Tensor eps = rng.normal_tensor(z0.shape());
  Tensor z = forward_diffuse(z0, t, s, eps);
  return {std::move(z), std::move(eps)};
}

Var epsilon_loss(const EpsModel& model, const Tensor& z0, const Tensor& c,
                 const DiffusionSchedule& s, std::size_t t, const Tensor& eps) {
  const Tensor z_t = forward_diffuse(z0, t, s, eps);
  const Var pred = model(Var::constant(z_t), t, c);
  return ad::mse(pred, Var::constant(eps));
}

Var training_loss(const EpsModel& model, const Tensor& z0, const Tensor& c,
                  const DiffusionSchedule& s, Rng& rng) {
  const std::size_t t = 1 + static_cast<std::size_t>(rng.below(s.steps()));
  const Tensor eps = rng.normal_tensor(z0.shape());
  return epsilon_loss(model, z0, c, s, t, eps);
}

Tensor ddim_update(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                   const DiffusionSchedule& s, const ValueRange* x0_clip) {
  require_same_shape(z_t, eps_hat, "ddim_update");
  if (x0_clip && !(x0_clip->lo <= x0_clip->hi)) throw ArgumentError("ddim_update: empty range");
  const double ab_t = s.alpha_bar(t), ab_p = s.alpha_bar(t_prev);
  const double sa_t = std::sqrt(ab_t), sb_t = std::sqrt(1.0 - ab_t);
  const double sa_p = std::sqrt(ab_p), sb_p = std::sqrt(1.0 - ab_p);
  Tensor out = z_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x0 = (z_t[i] - sb_t * eps_hat[i]) / sa_t;
    double eps = eps_hat[i];
    if (x0_clip && (x0 < x0_clip->lo || x0 > x0_clip->hi)) {
      x0 = std::clamp(x0, x0_clip->lo, x0_clip->hi);
      if (sb_t > 0.0) eps = (z_t[i] - sa_t * x0) / sb_t;
    }
    out[i] = sa_p * x0 + sb_p * eps;
  }
  return out;
}

Tensor ddim_step(const EpsPredictor& model, const Tensor& z_t, std::size_t t, std::size_t t_prev,
                 const Tensor& c, const DiffusionSchedule& s) {
  if (t == t_prev) return z_t;
  if (t < t_prev || t > s.steps()) throw ArgumentError("ddim_step: need T >= t > t_prev >= 0");
  return ddim_update(z_t, model(z_t, t, c), t, t_prev, s);
}

Tensor ddim_invert_step(const EpsPredictor& model, const Tensor& z_prev, std::size_t t_prev,
                        std::size_t t, const Tensor& c, const DiffusionSchedule& s) {
  if (t == t_prev) return z_prev;
  if (t < t_prev || t > s.steps()) throw ArgumentError("ddim_invert_step: need t > t_prev");
  return ddim_update(z_prev, model(z_prev, t, c), t_prev, t, s);
}

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double guidance_scale) {
  require_same_shape(eps_uncond, eps_cond, "cfg_combine");
  if (guidance_scale == 1.0) return eps_cond;
  Tensor out = eps_uncond;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = eps_uncond[i] + guidance_scale * (eps_cond[i] - eps_uncond[i]);
  }
  return out;
}

Tensor cfg_predict(const EpsPredictor& model, const Tensor& z_t, std::size_t t, const Tensor& c,
                   const Tensor& null_c, double guidance_scale) {
  return cfg_combine(model(z_t, t, null_c), model(z_t, t, c), guidance_scale);
}

std::vector<std::size_t> ddim_timesteps(std::size_t schedule_steps, std::size_t n) {
  if (n < 1 || n > schedule_steps) throw ArgumentError("ddim_timesteps: need 1 <= n <= T");
  std::vector<std::size_t> ts(n + 1);
  for (std::size_t i = 0; i <= n; ++i) ts[i] = (i * schedule_steps + n / 2) / n;
  ts[n] = schedule_steps;
  return ts;
}

Tensor ddim_sample(const EpsPredictor& model, const Tensor& z_T, const Tensor& c,
                   const DiffusionSchedule& s, std::size_t n, const Tensor* null_c,
                   double guidance_scale, const ValueRange* x0_clip) {
  const auto ts = ddim_timesteps(s.steps(), n);
  Tensor z = z_T;
  for (std::size_t i = n; i >= 1; --i) {
    const std::size_t t = ts[i], t_prev = ts[i - 1];
    const Tensor eps = null_c ? cfg_predict(model, z, t, c, *null_c, guidance_scale)
                              : model(z, t, c);
    z = ddim_update(z, eps, t, t_prev, s, x0_clip);
  }
  return z;
}

Tensor ddim_invert(const EpsPredictor& model, const Tensor& z0, const Tensor& c,
                   const DiffusionSchedule& s, std::size_t n) {
  const auto ts = ddim_timesteps(s.steps(), n);
  Tensor z = z0;
  for (std::size_t i = 1; i <= n; ++i) z = ddim_invert_step(model, z, ts[i - 1], ts[i], c, s);
  return z;
}

}  // namespace vidmamba
