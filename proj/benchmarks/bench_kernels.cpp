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

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "vidmamba/attention.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/selective_scan.hpp"
#include "vidmamba/ssm.hpp"
#include "vidmamba/video_scan.hpp"

namespace vidmamba {
namespace {

void BM_SelectiveScan(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const SelectiveParams p = SelectiveParams::init(16, 4, rng);
  const Tensor x = rng.normal_tensor({len, 16});
  for (auto _ : state) benchmark::DoNotOptimize(selective_scan(p, x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelectiveScan)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oN);

std::vector<AffineMap> random_maps(std::size_t n, Rng& rng) {
  std::vector<AffineMap> maps(n);
  for (auto& m : maps) m = {rng.uniform(-0.99, 0.99), rng.normal()};
  return maps;
}

void BM_ScanSequential(benchmark::State& state) {
  Rng rng(2);
  const auto maps = random_maps(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(scan_sequential(maps));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ScanSequential)->RangeMultiplier(8)->Range(512, 1 << 18)->Complexity(benchmark::oN);

void BM_ScanParallel(benchmark::State& state) {
  Rng rng(2);
  const auto maps = random_maps(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(scan_parallel(maps));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ScanParallel)->RangeMultiplier(8)->Range(512, 1 << 18)->Complexity(benchmark::oN);

void BM_DenseAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Var q = Var::constant(rng.normal_tensor({len, 16}));
  const Var k = Var::constant(rng.normal_tensor({len, 16}));
  const Var v = Var::constant(rng.normal_tensor({len, 16}));
  const std::vector<ScoreTerm> terms{{Var::constant(Tensor::scalar(1.0)), q, k}};
  const KeyGroups groups = KeyGroups::dense(len, len);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::grouped_attention(terms, v, groups, 0.25).value()[0]);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DenseAttention)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);

void BM_SparseCausalAttention(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kPerFrame = 256;
  const std::size_t len = frames * kPerFrame;
  Rng rng(4);
  const Var q = Var::constant(rng.normal_tensor({len, 16}));
  const Var k = Var::constant(rng.normal_tensor({len, 16}));
  const Var v = Var::constant(rng.normal_tensor({len, 16}));
  const std::vector<ScoreTerm> terms{{Var::constant(Tensor::scalar(1.0)), q, k}};
  const KeyGroups groups = KeyGroups::sparse_causal(frames, kPerFrame);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::grouped_attention(terms, v, groups, 0.25).value()[0]);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SparseCausalAttention)->RangeMultiplier(2)->Range(2, 16)->Complexity(benchmark::oN);

void BM_FlipScanOrders(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Tensor video = rng.normal_tensor({8, 4, side, side});
  for (auto _ : state) {
    for (ScanOrder o : kAllScanOrders) benchmark::DoNotOptimize(flatten(video, o));
  }
}
BENCHMARK(BM_FlipScanOrders)->RangeMultiplier(2)->Range(16, 64);

}  // namespace
}  // namespace vidmamba

BENCHMARK_MAIN();
