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

#include "vidmamba/train.hpp"

namespace vidmamba::harness {

struct AblationRow {
  std::string axis;
  std::string value;
  std::uint64_t seed = 0;
  double final_loss = 0.0;       // smoothed training loss at the end of the run
  double validation_loss = 0.0;
  double round_trip_error = 0.0; // inf when the round trip diverges
  double seconds = 0.0;
};

// Axis values: depth {1, 2, 4}; rank {4, 8, 12}; padding {none, fixed-token,
// learnable}; phi {0, 0.5, 1, learnable}.
std::vector<std::string> ablation_values(const std::string& axis);

// `base` with one axis value applied. The rank axis widens the model to at
// least 16 so that every k stays below the width.
TrainConfig apply_axis(TrainConfig base, const std::string& axis, const std::string& value);

struct AblationOptions {
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> values;  // empty: every value of the axis
  bool round_trip = true;
  std::size_t round_trip_videos = 1;
};

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::string& axis,
                                      const AblationOptions& opts,
                                      const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace vidmamba::harness
