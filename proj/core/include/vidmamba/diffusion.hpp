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

#include <functional>
#include <vector>

#include "vidmamba/autodiff.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Linear beta ramp; alpha_bar(0) = 1 by convention.
class DiffusionSchedule {
 public:
  DiffusionSchedule(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);

  std::size_t steps() const { return betas_.size(); }
  double beta(std::size_t t) const;       // 1 <= t <= T
  double alpha(std::size_t t) const;      // 1 - beta
  double alpha_bar(std::size_t t) const;  // 0 <= t <= T

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // index 0 holds 1
};

struct Noised {
  Tensor z_t;
  Tensor eps;
};

// z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps with eps ~ N(0, I).
Noised forward_diffuse(const Tensor& z0, std::size_t t, const DiffusionSchedule& s, Rng& rng);
// Same with a caller-supplied eps.
Tensor forward_diffuse(const Tensor& z0, std::size_t t, const DiffusionSchedule& s,
                       const Tensor& eps);

// eps_theta(z_t, t, c) on the graph (training) and as a plain function
// (sampling).
using EpsModel = std::function<Var(const Var& z_t, std::size_t t, const Tensor& c)>;
using EpsPredictor = std::function<Tensor(const Tensor& z_t, std::size_t t, const Tensor& c)>;

// ||eps - eps_theta(z_t, t, c)||^2 averaged over elements, for fixed t, eps.
Var epsilon_loss(const EpsModel& model, const Tensor& z0, const Tensor& c,
                 const DiffusionSchedule& s, std::size_t t, const Tensor& eps);
// Draws t ~ U{1..T} and eps ~ N(0, I), then epsilon_loss.
Var training_loss(const EpsModel& model, const Tensor& z0, const Tensor& c,
                  const DiffusionSchedule& s, Rng& rng);

// Closed interval for the predicted clean sample.
struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Deterministic (eta = 0) DDIM update from t down to t_prev given eps_hat.
// With `x0_clip` the predicted z_0 is clamped and eps re-derived from it.
Tensor ddim_update(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                   const DiffusionSchedule& s, const ValueRange* x0_clip = nullptr);
// t > t_prev >= 0; t == t_prev returns z_t unchanged.
Tensor ddim_step(const EpsPredictor& model, const Tensor& z_t, std::size_t t, std::size_t t_prev,
                 const Tensor& c, const DiffusionSchedule& s);
// Inversion step from t_prev up to t, using eps_theta(z_{t_prev}, t).
Tensor ddim_invert_step(const EpsPredictor& model, const Tensor& z_prev, std::size_t t_prev,
                        std::size_t t, const Tensor& c, const DiffusionSchedule& s);

// eps_u + s (eps_c - eps_u); s == 1 returns eps_c exactly.
Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double guidance_scale);
Tensor cfg_predict(const EpsPredictor& model, const Tensor& z_t, std::size_t t, const Tensor& c,
                   const Tensor& null_c, double guidance_scale);

// Evenly spaced timesteps 0 = t_0 < t_1 < ... < t_n = T.
std::vector<std::size_t> ddim_timesteps(std::size_t schedule_steps, std::size_t n);

// Full DDIM loops over `n` steps. `guidance_scale` enables classifier-free
// guidance against `null_c` when given.
Tensor ddim_sample(const EpsPredictor& model, const Tensor& z_T, const Tensor& c,
                   const DiffusionSchedule& s, std::size_t n, const Tensor* null_c = nullptr,
                   double guidance_scale = 1.0, const ValueRange* x0_clip = nullptr);
Tensor ddim_invert(const EpsPredictor& model, const Tensor& z0, const Tensor& c,
                   const DiffusionSchedule& s, std::size_t n);

}  // namespace vidmamba
