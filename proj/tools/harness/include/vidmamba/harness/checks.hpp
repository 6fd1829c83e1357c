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

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity (error, rate, ...)
  double threshold = 0.0;  // pass limit for `value`
  std::string detail;
};

// Max |scan_sequential - causal_conv(K, x)| over `cases` random SSMs with
// lengths up to `max_len`.
CheckResult check_recurrence_conv(std::uint64_t seed, std::size_t cases = 50,
                                  std::size_t max_len = 64);
// Max relative deviation of the prefix scan from the sequential scan, both for
// diagonal affine maps and for a dense discretized SSM, at every length.
CheckResult check_parallel_scan(std::uint64_t seed,
                                const std::vector<std::size_t>& lengths = {8, 64, 512, 4096});
// Klein-group composition table, index-formula oracle for every flip, and the
// flip / scan-order correspondence. All comparisons are exact.
CheckResult check_flip_group(std::uint64_t seed);
// fuse() against an explicit permute-then-sum oracle, exact.
CheckResult check_fuse(std::uint64_t seed);
// max_j |flip_j(block(x)) - block(flip_j(x))| with a trained-looking block.
CheckResult check_flip_equivariance(std::uint64_t seed);
// One result per module: ssm_core, video_scan, temporal_mamba,
// bypass_attention (threshold 1e-4) and the toy denoiser (1e-3).
std::vector<CheckResult> check_gradients(std::uint64_t seed, bool include_denoiser = true);
// Truncated-SVD factor error vs the singular-value tail, vs random rank-k
// competitors, and below-rank exactness.
CheckResult check_svd_init(std::uint64_t seed, std::size_t trials = 20,
                           std::size_t competitors = 100);
CheckResult check_jl(std::uint64_t seed, std::size_t trials, std::size_t d = 512,
                     std::size_t k = 256, double eps = 0.9);
// phi = 1 bit-identity with base attention and exact-rank agreement at any phi.
CheckResult check_bypass_limits(std::uint64_t seed);
// Trainable / frozen ratio of a live d = 320, k = 12 layer equals k / d.
CheckResult check_param_audit(std::size_t d = 320, std::size_t k = 12);

// Names of every check run_verify can produce, in run order.
std::vector<std::string> verify_check_names();

// Everything above with the verify-sized JL run, or only the named checks.
// Unknown names raise ArgumentError.
std::vector<CheckResult> run_verify(std::uint64_t seed, const std::vector<std::string>& only = {});

}  // namespace vidmamba::harness
