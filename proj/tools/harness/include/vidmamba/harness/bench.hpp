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
#include <string>
#include <vector>

namespace vidmamba::harness {

struct BenchOptions {
  std::vector<std::size_t> lengths{256, 512, 1024, 2048, 4096, 8192, 16384};
  std::size_t repeats = 3;
  std::size_t warmup = 1;
  std::size_t channels = 16;    // selective-scan inner width
  std::size_t state_dim = 4;
  std::size_t attn_width = 16;  // dense attention model width
  std::uint64_t seed = 0;
};

struct BenchPoint {
  std::string kernel;  // "selective_scan" or "attention"
  std::size_t length = 0;
  double median_seconds = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> points;
  double scan_slope = 0.0;  // NaN when fewer than two lengths
  double attention_slope = 0.0;
};

// Median-of-repeats wall time per length for the selective scan and dense
// softmax attention, then log-log slopes.
BenchResult run_bench(const BenchOptions& opts);

double median(std::vector<double> v);

}  // namespace vidmamba::harness
