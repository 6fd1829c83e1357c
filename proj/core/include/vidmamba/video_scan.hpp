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

#include "vidmamba/autodiff.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Spatial-first traversals of a [T, C, H, W] video. "Spatial reverse" is the
// exact reversal of the row-major pixel order inside a frame.
enum class ScanOrder {
  kSpatialFwdTemporalFwd = 0,
  kSpatialFwdTemporalRev = 1,
  kSpatialRevTemporalFwd = 2,
  kSpatialRevTemporalRev = 3,
};

inline constexpr std::array<ScanOrder, 4> kAllScanOrders = {
    ScanOrder::kSpatialFwdTemporalFwd, ScanOrder::kSpatialFwdTemporalRev,
    ScanOrder::kSpatialRevTemporalFwd, ScanOrder::kSpatialRevTemporalRev};

std::string_view to_string(ScanOrder order);

// Bijection between grid positions (t * H + i) * W + j and sequence
// positions. With frame separators the sequence gets one extra slot between
// consecutive frames; those slots have no grid position.
struct ScanLayout {
  std::size_t frames = 0, height = 0, width = 0;
  bool frame_separators = false;
  std::vector<std::size_t> forward_index;  // grid -> sequence
  std::vector<std::size_t> inverse_index;  // sequence -> grid, or kNoGrid

  static constexpr std::size_t kNoGrid = static_cast<std::size_t>(-1);

  std::size_t length() const { return inverse_index.size(); }
  std::size_t grid_size() const { return forward_index.size(); }
};

ScanLayout make_layout(std::size_t frames, std::size_t height, std::size_t width,
                       ScanOrder order, bool frame_separators = false);

struct Flattened {
  Tensor tokens;  // [L, C]
  ScanLayout layout;
};

Flattened flatten(const Tensor& video, ScanOrder order);
Tensor flatten(const Tensor& video, const ScanLayout& layout);
Tensor unflatten(const Tensor& tokens, const ScanLayout& layout);

// Branch flips: 0 identity, 1 temporal reversal, 2 180-degree spatial
// rotation, 3 both. Each is an involution; together they form the Klein
// four-group.
void check_branch(int branch);
Tensor flip(const Tensor& video, int branch);
Tensor unflip(const Tensor& video, int branch);
// out[k] = video[index[k]] for the flip of a video with this shape.
std::vector<std::size_t> flip_index(const Shape& video_shape, int branch);

// Learnable one-pixel border: one value per channel, shared by every frame
// and every ring position.
struct FramePadding {
  Tensor theta;  // [C]
};

// [T, C, H, W] -> [T, C, H + 2, W + 2]; interior copied, ring = theta[c].
Tensor pad_frames(const Tensor& video, const FramePadding& padding);
// Drops the one-pixel ring.
Tensor crop_frames(const Tensor& padded);

namespace ad {
Var pad_frames(const Var& video, const Var& theta);
Var crop_frames(const Var& padded);
Var flip(const Var& video, int branch);
Var flatten(const Var& video, const ScanLayout& layout);
Var unflatten(const Var& tokens, const ScanLayout& layout);
}  // namespace ad

}  // namespace vidmamba
