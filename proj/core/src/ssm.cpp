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

#include "vidmamba/ssm.hpp"

#include <cmath>

#include "vidmamba/linalg.hpp"

namespace vidmamba {
namespace {

void check_shapes(const SsmParams& p) {
  const std::size_t n = p.state_dim();
  if (n == 0 || p.a.rank() != 2 || p.a.dim(1) != n) {
    throw DimensionError("ssm: A must be square, got " + shape_string(p.a.shape()));
  }
  if (p.b.shape() != Shape{n, 1}) {
    throw DimensionError("ssm: B must be " + shape_string({n, 1}));
  }
  if (p.c.shape() != Shape{1, n}) {
    throw DimensionError("ssm: C must be " + shape_string({1, n}));
  }
}

void require_discretized(const SsmParams& p) {
  check_shapes(p);
  if (!p.discretized()) throw ArgumentError("ssm: params are not discretized");
}

// (I + X/2 + X^2/6 + X^3/24) v, accurate to O(||X||^4) for tiny X.
Tensor phi1_series(const Tensor& x, const Tensor& v) {
  Tensor term = v;
  Tensor acc = v;
  for (int j = 2; j <= 4; ++j) {
    term = matmul(x, term) * (1.0 / j);
    acc += term;
  }
  return acc;
}

// phi1(X) v = sum_j X^j v / (j+1)!, read off the top-right block of
// exp([[X, v], [0, 0]]).
Tensor phi1_augmented(const Tensor& x, const Tensor& v) {
  const std::size_t n = x.dim(0);
  Tensor aug({n + 1, n + 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug.at(i, j) = x.at(i, j);
    aug.at(i, n) = v[i];
  }
  const Tensor e = expm(aug);
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i) out[i] = e.at(i, n);
  return out;
}

}  // namespace

SsmParams discretize_zoh(SsmParams p) {
  check_shapes(p);
  if (!(p.delta > 0.0)) throw ArgumentError("discretize_zoh: step must be positive");
  if (!p.a.all_finite() || !p.b.all_finite()) {
    throw NumericError("discretize_zoh: non-finite A or B");
  }
  const std::size_t n = p.state_dim();
  const Tensor x = p.a * p.delta;
  const Tensor db = p.b * p.delta;
  p.a_d = expm(x);

  if (frobenius_norm(x) < 1e-6) {
    p.b_d = phi1_series(x, db);
  } else {
    Tensor rhs = matmul(p.a_d - Tensor::identity(n), db);
    try {
      p.b_d = solve(x, rhs, 1e-8);
    } catch (const NumericError&) {
      p.b_d = phi1_augmented(x, db);
    }
  }
  if (!p.b_d.all_finite()) throw NumericError("discretize_zoh: overflow in B_d");
  return p;
}

std::vector<double> scan_sequential(const SsmParams& p, std::span<const double> x) {
  require_discretized(p);
  const std::size_t n = p.state_dim();
  std::vector<double> h(n, 0.0), next(n);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = p.b_d[i] * x[t];
      for (std::size_t j = 0; j < n; ++j) s += p.a_d.at(i, j) * h[j];
      next[i] = s;
    }
    h.swap(next);
    double out = 0.0;
    for (std::size_t i = 0; i < n; ++i) out += p.c[i] * h[i];
    y[t] = out;
  }
  return y;
}

std::vector<double> conv_kernel(const SsmParams& p, std::size_t length) {
  require_discretized(p);
  if (length == 0) throw ArgumentError("conv_kernel: length must be positive");
  const std::size_t n = p.state_dim();
  std::vector<double> k(length);
  std::vector<double> v(p.b_d.values()), next(n);
  for (std::size_t j = 0; j < length; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p.c[i] * v[i];
    k[j] = s;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < n; ++l) acc += p.a_d.at(i, l) * v[l];
      next[i] = acc;
    }
    v.swap(next);
  }
  return k;
}

std::vector<double> causal_conv(std::span<const double> kernel, std::span<const double> x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t reach = std::min(t + 1, kernel.size());
    double s = 0.0;
    for (std::size_t j = 0; j < reach; ++j) s += kernel[j] * x[t - j];
    y[t] = s;
  }
  return y;
}

std::vector<double> scan_sequential(std::span<const AffineMap> maps) {
  std::vector<double> h(maps.size());
  double state = 0.0;
  for (std::size_t t = 0; t < maps.size(); ++t) {
    state = maps[t].a * state + maps[t].b;
    h[t] = state;
  }
  return h;
}

std::vector<double> scan_parallel(std::span<const AffineMap> maps) {
  std::vector<AffineMap> prefix(maps.begin(), maps.end());
  blelloch_inclusive_scan(
      prefix,
      [](const AffineMap& earlier, const AffineMap& later) {
        return compose(later, earlier);
      },
      AffineMap{});
  std::vector<double> h(prefix.size());
  for (std::size_t t = 0; t < prefix.size(); ++t) h[t] = prefix[t].b;
  return h;
}

namespace {

struct MatrixAffine {
  std::vector<double> a;  // n x n row-major
  std::vector<double> b;  // n
};

}  // namespace

std::vector<double> scan_parallel(const SsmParams& p, std::span<const double> x) {
  require_discretized(p);
  const std::size_t n = p.state_dim();
  MatrixAffine identity{std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) identity.a[i * n + i] = 1.0;

  std::vector<MatrixAffine> maps(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    maps[t].a = p.a_d.values();
    maps[t].b.resize(n);
    for (std::size_t i = 0; i < n; ++i) maps[t].b[i] = p.b_d[i] * x[t];
  }
  auto combine = [n](const MatrixAffine& earlier, const MatrixAffine& later) {
    MatrixAffine out{std::vector<double>(n * n, 0.0), later.b};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double lik = later.a[i * n + k];
        for (std::size_t j = 0; j < n; ++j) out.a[i * n + j] += lik * earlier.a[k * n + j];
        out.b[i] += lik * earlier.b[k];
      }
    return out;
  };
  blelloch_inclusive_scan(maps, combine, identity);

  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p.c[i] * maps[t].b[i];
    y[t] = s;
  }
  return y;
}

}  // namespace vidmamba
