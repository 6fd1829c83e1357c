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

#include "vidmamba/video_scan.hpp"

namespace vidmamba {
namespace {

void require_video(const Tensor& v, const char* what) {
  if (v.rank() != 4) {
    throw DimensionError(std::string(what) + ": expected [T, C, H, W], got " +
                         shape_string(v.shape()));
  }
}

bool temporal_reversed(ScanOrder o) {
  return o == ScanOrder::kSpatialFwdTemporalRev || o == ScanOrder::kSpatialRevTemporalRev;
}

bool spatial_reversed(ScanOrder o) {
  return o == ScanOrder::kSpatialRevTemporalFwd || o == ScanOrder::kSpatialRevTemporalRev;
}

// Token-tensor gather indices: tokens[l * C + c] = video[index].
std::vector<std::size_t> flatten_index(const ScanLayout& layout, std::size_t channels) {
  const std::size_t plane = layout.height * layout.width;
  std::vector<std::size_t> idx(layout.length() * channels, ad::kFill);
  for (std::size_t l = 0; l < layout.length(); ++l) {
    const std::size_t g = layout.inverse_index[l];
    if (g == ScanLayout::kNoGrid) continue;
    const std::size_t t = g / plane, s = g % plane;
    for (std::size_t c = 0; c < channels; ++c) {
      idx[l * channels + c] = (t * channels + c) * plane + s;
    }
  }
  return idx;
}

std::vector<std::size_t> unflatten_index(const ScanLayout& layout, std::size_t channels) {
  const std::size_t plane = layout.height * layout.width;
  std::vector<std::size_t> idx(layout.grid_size() * channels);
  for (std::size_t t = 0; t < layout.frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t s = 0; s < plane; ++s) {
        idx[(t * channels + c) * plane + s] =
            layout.forward_index[t * plane + s] * channels + c;
      }
  return idx;
}

std::vector<std::size_t> crop_index(const Shape& padded) {
  const std::size_t frames = padded[0], channels = padded[1];
  const std::size_t hp = padded[2], wp = padded[3];
  const std::size_t h = hp - 2, w = wp - 2;
  std::vector<std::size_t> idx;
  idx.reserve(frames * channels * h * w);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          idx.push_back(((t * channels + c) * hp + i + 1) * wp + j + 1);
  return idx;
}

Tensor apply_index(const Tensor& src, const std::vector<std::size_t>& idx, Shape shape) {
  Tensor out(std::move(shape));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] != ad::kFill) out[k] = src[idx[k]];
  }
  return out;
}

}  // namespace

std::string_view to_string(ScanOrder order) {
  switch (order) {
    case ScanOrder::kSpatialFwdTemporalFwd: return "spatial_fwd_temporal_fwd";
    case ScanOrder::kSpatialFwdTemporalRev: return "spatial_fwd_temporal_rev";
    case ScanOrder::kSpatialRevTemporalFwd: return "spatial_rev_temporal_fwd";
    case ScanOrder::kSpatialRevTemporalRev: return "spatial_rev_temporal_rev";
  }
  return "unknown";
}

ScanLayout make_layout(std::size_t frames, std::size_t height, std::size_t width,
                       ScanOrder order, bool frame_separators) {
  ScanLayout layout;
  layout.frames = frames;
  layout.height = height;
  layout.width = width;
  layout.frame_separators = frame_separators;
  const std::size_t plane = height * width;
  const std::size_t stride = plane + (frame_separators ? 1 : 0);
  const std::size_t length =
      frames * plane + (frame_separators && frames > 0 ? frames - 1 : 0);
  layout.forward_index.resize(frames * plane);
  layout.inverse_index.assign(length, ScanLayout::kNoGrid);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t tp = temporal_reversed(order) ? frames - 1 - t : t;
    for (std::size_t s = 0; s < plane; ++s) {
      const std::size_t sp = spatial_reversed(order) ? plane - 1 - s : s;
      const std::size_t seq = tp * stride + sp;
      layout.forward_index[t * plane + s] = seq;
      layout.inverse_index[seq] = t * plane + s;
    }
  }
  return layout;
}

Flattened flatten(const Tensor& video, ScanOrder order) {
  require_video(video, "flatten");
  ScanLayout layout = make_layout(video.dim(0), video.dim(2), video.dim(3), order);
  Tensor tokens = flatten(video, layout);
  return {std::move(tokens), std::move(layout)};
}

Tensor flatten(const Tensor& video, const ScanLayout& layout) {
  require_video(video, "flatten");
  if (video.dim(0) != layout.frames || video.dim(2) != layout.height ||
      video.dim(3) != layout.width) {
    throw DimensionError("flatten: layout does not match " + shape_string(video.shape()));
  }
  const std::size_t channels = video.dim(1);
  return apply_index(video, flatten_index(layout, channels), {layout.length(), channels});
}

Tensor unflatten(const Tensor& tokens, const ScanLayout& layout) {
  if (tokens.rank() != 2 || tokens.dim(0) != layout.length()) {
    throw DimensionError("unflatten: tokens " + shape_string(tokens.shape()) +
                         " vs layout length " + std::to_string(layout.length()));
  }
  const std::size_t channels = tokens.dim(1);
  return apply_index(tokens, unflatten_index(layout, channels),
                     {layout.frames, channels, layout.height, layout.width});
}

void check_branch(int branch) {
  if (branch < 0 || branch > 3) {
    throw ArgumentError("flip branch must be in 0..3, got " + std::to_string(branch));
  }
}

std::vector<std::size_t> flip_index(const Shape& shape, int branch) {
  check_branch(branch);
  if (shape.size() != 4) throw DimensionError("flip: expected [T, C, H, W]");
  const std::size_t frames = shape[0], channels = shape[1], h = shape[2], w = shape[3];
  const bool rev_t = branch == 1 || branch == 3;
  const bool rev_s = branch == 2 || branch == 3;
  std::vector<std::size_t> idx(shape_numel(shape));
  std::size_t k = 0;
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t ts = rev_t ? frames - 1 - t : t;
          const std::size_t is = rev_s ? h - 1 - i : i;
          const std::size_t js = rev_s ? w - 1 - j : j;
          idx[k++] = ((ts * channels + c) * h + is) * w + js;
        }
  return idx;
}

Tensor flip(const Tensor& video, int branch) {
  require_video(video, "flip");
  check_branch(branch);
  if (branch == 0) return video;
  return apply_index(video, flip_index(video.shape(), branch), video.shape());
}

Tensor unflip(const Tensor& video, int branch) { return flip(video, branch); }

Tensor pad_frames(const Tensor& video, const FramePadding& padding) {
  require_video(video, "pad_frames");
  const std::size_t frames = video.dim(0), channels = video.dim(1);
  const std::size_t h = video.dim(2), w = video.dim(3);
  if (h < 1 || w < 1) throw DimensionError("pad_frames: empty frame");
  if (padding.theta.size() != channels) {
    throw DimensionError("pad_frames: theta has " + std::to_string(padding.theta.size()) +
                         " values for " + std::to_string(channels) + " channels");
  }
  Tensor out({frames, channels, h + 2, w + 2});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < h + 2; ++i)
        for (std::size_t j = 0; j < w + 2; ++j) {
          const bool ring = i == 0 || j == 0 || i == h + 1 || j == w + 1;
          out.at(t, c, i, j) = ring ? padding.theta[c] : video.at(t, c, i - 1, j - 1);
        }
  return out;
}

Tensor crop_frames(const Tensor& padded) {
  require_video(padded, "crop_frames");
  if (padded.dim(2) < 3 || padded.dim(3) < 3) throw DimensionError("crop_frames: too small");
  const Shape s = padded.shape();
  return apply_index(padded, crop_index(s), {s[0], s[1], s[2] - 2, s[3] - 2});
}

namespace ad {

Var pad_frames(const Var& video, const Var& theta) {
  Tensor out = vidmamba::pad_frames(video.value(), FramePadding{theta.value()});
  const Shape in_shape = video.shape();
  return make_op(std::move(out), {video, theta}, [in_shape](Node& self) {
    const std::size_t frames = in_shape[0], channels = in_shape[1];
    const std::size_t h = in_shape[2], w = in_shape[3];
    const Tensor& g = self.grad;
    Tensor* dv = self.parents[0]->requires_grad ? &self.parents[0]->grad_buffer() : nullptr;
    Tensor* dt = self.parents[1]->requires_grad ? &self.parents[1]->grad_buffer() : nullptr;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < h + 2; ++i)
          for (std::size_t j = 0; j < w + 2; ++j) {
            const bool ring = i == 0 || j == 0 || i == h + 1 || j == w + 1;
            const double gv = g.at(t, c, i, j);
            if (ring) {
              if (dt) (*dt)[c] += gv;
            } else if (dv) {
              dv->at(t, c, i - 1, j - 1) += gv;
            }
          }
  });
}

Var crop_frames(const Var& padded) {
  const Shape s = padded.shape();
  if (s.size() != 4 || s[2] < 3 || s[3] < 3) throw DimensionError("crop_frames: too small");
  return gather(padded, crop_index(s), {s[0], s[1], s[2] - 2, s[3] - 2});
}

Var flip(const Var& video, int branch) {
  check_branch(branch);
  if (branch == 0) return video;
  return gather(video, flip_index(video.shape(), branch), video.shape());
}

Var flatten(const Var& video, const ScanLayout& layout) {
  const std::size_t channels = video.shape().at(1);
  return gather(video, flatten_index(layout, channels), {layout.length(), channels});
}

Var unflatten(const Var& tokens, const ScanLayout& layout) {
  const std::size_t channels = tokens.shape().at(1);
  return gather(tokens, unflatten_index(layout, channels),
                {layout.frames, channels, layout.height, layout.width});
}

}  // namespace ad
}  // namespace vidmamba
