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

#include "vidmamba/dataset.hpp"

#include <cmath>
#include <numbers>

namespace vidmamba {
namespace {

long wrap(long v, long n) { return ((v % n) + n) % n; }

// Filled square of side `side` at (y, x), translated by t * v with wrap.
void draw_translate(Tensor& video, Rng& rng, VideoSample& s) {
  const std::size_t frames = video.dim(0), n = video.dim(2);
  const long side = static_cast<long>(n / 4);
  const long y0 = static_cast<long>(rng.below(n)), x0 = static_cast<long>(rng.below(n));
  long vy = 0, vx = 0;
  while (vy == 0 && vx == 0) {
    vy = static_cast<long>(rng.below(5)) - 2;
    vx = static_cast<long>(rng.below(5)) - 2;
  }
  s.velocity = {vy, vx};
  const long ln = static_cast<long>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const long ty = static_cast<long>(t) * vy, tx = static_cast<long>(t) * vx;
    for (long dy = 0; dy < side; ++dy) {
      for (long dx = 0; dx < side; ++dx) {
        const auto y = static_cast<std::size_t>(wrap(y0 + dy + ty, ln));
        const auto x = static_cast<std::size_t>(wrap(x0 + dx + tx, ln));
        video.at(t, 0, y, x) = 1.0;
      }
    }
  }
}

// Bar through the centre rotating by a fixed angular velocity.
void draw_rotate(Tensor& video, Rng& rng) {
  const std::size_t frames = video.dim(0), n = video.dim(2);
  const double a0 = rng.uniform(0.0, std::numbers::pi);
  const double omega = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.25, 0.5);
  const double c = 0.5 * static_cast<double>(n - 1);
  const double half_len = 0.4 * static_cast<double>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const double a = a0 + omega * static_cast<double>(t);
    const double ux = std::cos(a), uy = std::sin(a);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double px = static_cast<double>(x) - c, py = static_cast<double>(y) - c;
        const double along = px * ux + py * uy;
        const double across = -px * uy + py * ux;
        if (std::abs(across) <= 1.0 && std::abs(along) <= half_len) video.at(t, 1, y, x) = 1.0;
      }
    }
  }
}

// Static disc whose colour cycles through the first two channels; the last
// channel carries a constant tag.
void draw_color_shift(Tensor& video, Rng& rng) {
  const std::size_t frames = video.dim(0), chans = video.dim(1), n = video.dim(2);
  const double r = 0.2 * static_cast<double>(n);
  const double cy = rng.uniform(r, static_cast<double>(n) - r);
  const double cx = rng.uniform(r, static_cast<double>(n) - r);
  const double p0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double omega = rng.uniform(0.6, 1.2);
  for (std::size_t t = 0; t < frames; ++t) {
    const double ph = p0 + omega * static_cast<double>(t);
    const double col[2] = {0.5 * (1.0 + std::cos(ph)), 0.5 * (1.0 + std::sin(ph))};
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        if (dy * dy + dx * dx > r * r) continue;
        for (std::size_t ch = 0; ch < chans; ++ch) {
          video.at(t, ch, y, x) = ch + 1 == chans ? 1.0 : col[ch % 2];
        }
      }
    }
  }
}

}  // namespace

std::string_view to_string(MotionClass c) {
  switch (c) {
    case MotionClass::kTranslate: return "translate";
    case MotionClass::kRotate: return "rotate";
    case MotionClass::kColorShift: return "color-shift";
  }
  return "unknown";
}

void DatasetSpec::validate() const {
  if (frames < 4 || frames > 16) throw ConfigError("dataset: frames must be in [4, 16]");
  if (size < 16 || size > 32) throw ConfigError("dataset: size must be in [16, 32]");
  if (channels < 3) throw ConfigError("dataset: need at least 3 channels");
  if (per_class < 1) throw ConfigError("dataset: per_class must be positive");
}

std::vector<VideoSample> make_synthetic_dataset(const DatasetSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<VideoSample> out;
  out.reserve(spec.per_class * kMotionClasses);
  for (std::size_t i = 0; i < spec.per_class * kMotionClasses; ++i) {
    VideoSample s;
    s.label = static_cast<MotionClass>(i % kMotionClasses);
    s.video = Tensor({spec.frames, spec.channels, spec.size, spec.size});
    switch (s.label) {
      case MotionClass::kTranslate: draw_translate(s.video, rng, s); break;
      case MotionClass::kRotate: draw_rotate(s.video, rng); break;
      case MotionClass::kColorShift: draw_color_shift(s.video, rng); break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

Tensor roll_frame(const Tensor& video, std::size_t frame, long dy, long dx) {
  if (video.rank() != 4 || frame >= video.dim(0)) throw DimensionError("roll_frame: bad frame");
  const std::size_t c = video.dim(1), h = video.dim(2), w = video.dim(3);
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const auto yy = static_cast<std::size_t>(wrap(static_cast<long>(y) + dy, static_cast<long>(h)));
        const auto xx = static_cast<std::size_t>(wrap(static_cast<long>(x) + dx, static_cast<long>(w)));
        out[(ch * h + yy) * w + xx] = video.at(frame, ch, y, x);
      }
    }
  }
  return out;
}

Tensor condition_embedding(MotionClass c, std::size_t dim) {
  if (dim < kMotionClasses) throw ArgumentError("condition_embedding: dim must be >= 3");
  Tensor e({dim});
  e[static_cast<std::size_t>(c)] = 1.0;
  return e;
}

Tensor null_embedding(std::size_t dim) { return Tensor({dim}); }

}  // namespace vidmamba
