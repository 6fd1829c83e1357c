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

#include <cmath>
#include <cstddef>
#include <vector>

#include "vidmamba/tensor.hpp"

// Straightforward reference implementations. They trade speed for being
// obviously correct and share no code with the library.
namespace oracle {

using vidmamba::Tensor;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
  Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < n; ++k) s += static_cast<long double>(a.at(i, k)) * b.at(k, j);
      c.at(i, j) = static_cast<double>(s);
    }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

// Plain Taylor series without scaling; only for small-norm arguments.
inline Tensor expm_taylor(const Tensor& a, int terms = 60) {
  const std::size_t n = a.dim(0);
  Tensor sum = identity(n), term = identity(n);
  for (int k = 1; k < terms; ++k) {
    term = matmul(term, a) * (1.0 / k);
    sum += term;
  }
  return sum;
}

// exp(A) for large norms: exp(A / 2^s)^(2^s) with the Taylor series inside.
inline Tensor expm_squaring(const Tensor& a, int halvings = 10) {
  Tensor e = expm_taylor(a * std::ldexp(1.0, -halvings));
  for (int i = 0; i < halvings; ++i) e = matmul(e, e);
  return e;
}

inline double frobenius(const Tensor& a) {
  long double s = 0.0L;
  for (double v : a.values()) s += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(s));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> softmax(const std::vector<double>& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  std::vector<double> p(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) z += p[i] = std::exp(s[i] - mx);
  for (double& v : p) v /= z;
  return p;
}

// Row-major rows of x: out_i = sum_j softmax_j(scale * score(i, j)) v_j over keys[i].
template <typename Score>
Tensor attention_rows(std::size_t queries, const std::vector<std::vector<std::size_t>>& keys,
                      Score score, const Tensor& v, double scale) {
  const std::size_t d = v.dim(1);
  Tensor out({queries, d});
  for (std::size_t i = 0; i < queries; ++i) {
    std::vector<double> s;
    for (std::size_t j : keys[i]) s.push_back(scale * score(i, j));
    const auto p = softmax(s);
    for (std::size_t n = 0; n < keys[i].size(); ++n)
      for (std::size_t c = 0; c < d; ++c) out.at(i, c) += p[n] * v.at(keys[i][n], c);
  }
  return out;
}

}  // namespace oracle
