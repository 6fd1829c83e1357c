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

#include "vidmamba/harness/ablate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace vidmamba::harness {

std::vector<std::string> ablation_values(const std::string& axis) {
  if (axis == "depth") return {"1", "2", "4"};
  if (axis == "rank") return {"4", "8", "12"};
  if (axis == "padding") return {"none", "fixed-token", "learnable"};
  if (axis == "phi") return {"0", "0.5", "1", "learnable"};
  throw ArgumentError("unknown ablation axis '" + axis + "' (depth, rank, padding, phi)");
}

TrainConfig apply_axis(TrainConfig cfg, const std::string& axis, const std::string& value) {
  const auto values = ablation_values(axis);
  if (std::find(values.begin(), values.end(), value) == values.end()) {
    throw ArgumentError("ablation axis '" + axis + "' has no value '" + value + "'");
  }
  if (axis == "depth") {
    cfg.model.depth = std::stoul(value);
  } else if (axis == "rank") {
    cfg.model.use_bypass = true;
    cfg.model.width = std::max<std::size_t>(cfg.model.width, 16);
    cfg.model.bypass.rank = std::stoul(value);
  } else if (axis == "padding") {
    cfg.model.padding = parse_padding_mode(value);
  } else {
    cfg.model.use_bypass = true;
    if (value == "learnable") {
      cfg.model.bypass.phi_mode = PhiMode::kLearnable;
      cfg.model.bypass.phi = 0.5;
    } else {
      cfg.model.bypass.phi_mode = PhiMode::kFixed;
      cfg.model.bypass.phi = std::stod(value);
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::string& axis,
                                      const AblationOptions& opts,
                                      const std::function<void(const AblationRow&)>& on_row) {
  const auto values = opts.values.empty() ? ablation_values(axis) : opts.values;
  std::vector<AblationRow> rows;
  for (const std::string& value : values) {
    for (std::uint64_t seed : opts.seeds) {
      TrainConfig cfg = apply_axis(base, axis, value);
      cfg.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      ToyDenoiser model = make_model(cfg);
      const TrainResult tr = train(cfg, model);
      AblationRow row{axis, value, seed, tr.final_smoothed, validation_loss(cfg, model), 0.0, 0.0};
      if (opts.round_trip) {
        try {
          row.round_trip_error = round_trip_error(cfg, model, opts.round_trip_videos);
        } catch (const NumericError&) {
          row.round_trip_error = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(row.round_trip_error)) {
          row.round_trip_error = std::numeric_limits<double>::infinity();
        }
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (on_row) on_row(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace vidmamba::harness
