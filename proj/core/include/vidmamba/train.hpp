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
#include <functional>
#include <string>
#include <vector>

#include "vidmamba/dataset.hpp"
#include "vidmamba/denoiser.hpp"
#include "vidmamba/diffusion.hpp"

namespace vidmamba {

struct TrainConfig {
  std::uint64_t seed = 0;
  DatasetSpec data{};
  DenoiserConfig model{};
  std::size_t steps = 500;
  double lr = 3e-3;
  std::size_t batch = 1;
  double cond_drop = 0.1;       // probability of training on the null embedding
  std::size_t schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::size_t sample_steps = 50;
  double guidance_scale = 12.5;
  std::size_t val_draws = 4;    // (t, eps) draws per validation video
  std::size_t smooth_window = 50;

  DiffusionSchedule schedule() const { return {schedule_steps, beta_start, beta_end}; }
  void validate() const;
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys, duplicate
// keys and malformed values raise ConfigError naming the key.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
// Canonical text with every key; parse_train_config round-trips it exactly.
std::string render_train_config(const TrainConfig& cfg);

struct TrainResult {
  std::vector<double> losses;  // one per step
  double initial_smoothed = 0.0;
  double final_smoothed = 0.0;
};

// Mean of the first / last `window` entries (clamped to the curve length).
double smoothed_head(const std::vector<double>& losses, std::size_t window);
double smoothed_tail(const std::vector<double>& losses, std::size_t window);

// Model built from Rng(seed, 0).
ToyDenoiser make_model(const TrainConfig& cfg);
// Training videos from Rng(seed, 1); validation videos from Rng(seed, 3).
std::vector<VideoSample> training_set(const TrainConfig& cfg);
std::vector<VideoSample> validation_set(const TrainConfig& cfg);

// Adam on eps-prediction loss. Throws NumericError naming the step when the
// loss becomes non-finite.
TrainResult train(const TrainConfig& cfg, ToyDenoiser& model,
                  const std::function<void(std::size_t, double)>& on_step = {});

// Conditional eps-prediction loss on the validation set at fixed stratified
// timesteps and fixed noise.
double validation_loss(const TrainConfig& cfg, const ToyDenoiser& model);

// DDIM inversion followed by DDIM sampling (no guidance) over cfg.sample_steps;
// mean relative Frobenius error over the first `videos` validation videos.
double round_trip_error(const TrainConfig& cfg, const ToyDenoiser& model, std::size_t videos = 3);

// Guided sample for `label` from z_T ~ N(0, I) drawn from Rng(seed, stream),
// with the predicted clean video clamped to the data range [0, 1].
Tensor sample_video(const TrainConfig& cfg, const ToyDenoiser& model, MotionClass label,
                    double guidance_scale, std::uint64_t stream);

EpsPredictor predictor(const ToyDenoiser& model);

}  // namespace vidmamba
