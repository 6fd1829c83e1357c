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

#include <array>
#include <string_view>
#include <vector>

#include "vidmamba/rng.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

enum class MotionClass : std::size_t { kTranslate = 0, kRotate = 1, kColorShift = 2 };
inline constexpr std::size_t kMotionClasses = 3;
std::string_view to_string(MotionClass c);

struct DatasetSpec {
  std::size_t frames = 4;     // 4..16
  std::size_t size = 16;      // H = W, 16..32
  std::size_t channels = 3;
  std::size_t per_class = 8;
  void validate() const;
};

struct VideoSample {
  Tensor video;  // [T, C, H, W], values in [0, 1]
  MotionClass label = MotionClass::kTranslate;
  // Translation velocity in pixels per frame (translate class only).
  std::array<long, 2> velocity{0, 0};
};

// Classes interleaved: sample i has class i % 3. Pure function of (spec, rng state).
std::vector<VideoSample> make_synthetic_dataset(const DatasetSpec& spec, Rng& rng);

// Frame 0 of `video` rolled by (dy, dx) with wrap-around, for every channel.
Tensor roll_frame(const Tensor& video, std::size_t frame, long dy, long dx);

// Unit one-hot embedding for a class, in `dim` >= 3 dimensions.
Tensor condition_embedding(MotionClass c, std::size_t dim);
// All-zero embedding used for unconditional passes.
Tensor null_embedding(std::size_t dim);

}  // namespace vidmamba
