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

#include <span>
#include <vector>

#include "vidmamba/parallel.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Linear time-invariant state-space model h' = A h + B x, y = C h and its
// zero-order-hold discretization.
struct SsmParams {
  Tensor a;        // N x N
  Tensor b;        // N x 1
  Tensor c;        // 1 x N
  double delta = 1.0;
  Tensor a_d;      // N x N, filled by discretize_zoh
  Tensor b_d;      // N x 1, filled by discretize_zoh

  std::size_t state_dim() const { return a.empty() ? 0 : a.dim(0); }
  bool discretized() const { return !a_d.empty(); }
};

// A_d = exp(dA), B_d = (dA)^{-1} (exp(dA) - I) dB. When ||dA||_F < 1e-6 the
// series (I + dA/2 + (dA)^2/6 + ...) dB is used; when dA is singular the
// same series is summed exactly through an augmented matrix exponential.
SsmParams discretize_zoh(SsmParams params);

// h_t = A_d h_{t-1} + B_d x_t, y_t = C h_t, h_0 = 0.
std::vector<double> scan_sequential(const SsmParams& params, std::span<const double> x);

// K[j] = C A_d^j B_d for j < length.
std::vector<double> conv_kernel(const SsmParams& params, std::size_t length);

// y_t = sum_{j<=t} k[j] x_{t-j}.
std::vector<double> causal_conv(std::span<const double> kernel, std::span<const double> x);

// h -> a h + b.
struct AffineMap {
  double a = 1.0;
  double b = 0.0;
};

// Applies `earlier` first, then `later`.
inline AffineMap compose(const AffineMap& later, const AffineMap& earlier) {
  return {later.a * earlier.a, later.a * earlier.b + later.b};
}

// Work-efficient (up-sweep / down-sweep) inclusive scan for an associative,
// possibly non-commutative `combine(earlier, later)`. Levels with many
// independent nodes are split across workers; the combination tree is fixed,
// so the result is deterministic.
template <typename T, typename Combine>
void blelloch_inclusive_scan(std::vector<T>& xs, Combine combine, const T& identity) {
  const std::size_t n = xs.size();
  if (n <= 1) return;
  std::size_t padded = 1;
  while (padded < n) padded <<= 1;
  std::vector<T> tree(xs);
  tree.resize(padded, identity);

  for (std::size_t stride = 1; stride < padded; stride <<= 1) {
    const std::size_t span = stride << 1;
    parallel_for(padded / span, [&](std::size_t k) {
      const std::size_t i = (k + 1) * span - 1;
      tree[i] = combine(tree[i - stride], tree[i]);
    });
  }
  tree[padded - 1] = identity;
  for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1) {
    const std::size_t span = stride << 1;
    parallel_for(padded / span, [&](std::size_t k) {
      const std::size_t i = (k + 1) * span - 1;
      T left = tree[i - stride];
      tree[i - stride] = tree[i];
      tree[i] = combine(tree[i], left);
    });
  }
  // tree now holds the exclusive scan.
  parallel_for(n, [&](std::size_t i) { xs[i] = combine(tree[i], xs[i]); });
}

// States h_t = a_t h_{t-1} + b_t with h_0 = 0, by straight iteration.
std::vector<double> scan_sequential(std::span<const AffineMap> maps);

// Same states via the parallel prefix scan over affine-map composition.
std::vector<double> scan_parallel(std::span<const AffineMap> maps);

// Output of the discretized SSM via a prefix scan over the per-token affine
// maps h -> A_d h + B_d x_t (dense N x N composition).
std::vector<double> scan_parallel(const SsmParams& params, std::span<const double> x);

}  // namespace vidmamba
