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

#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Multiply counter for cost audits. Thread-local; every dense product in this
// header adds m*n*p.
std::uint64_t multiply_count();
void reset_multiply_count();
void add_multiply_count(std::uint64_t n);

Tensor matmul(const Tensor& a, const Tensor& b);
// a^T b without forming the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a b^T without forming the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor diag(const Tensor& v);

// Matrix exponential by scaling and squaring of a degree-18 Taylor polynomial.
Tensor expm(const Tensor& a);

// Solves a x = b (b may have several columns) with partially pivoted LU.
// Throws NumericError when a pivot falls below `singular_tol * max|a|`.
Tensor solve(const Tensor& a, const Tensor& b, double singular_tol = 1e-12);

struct Svd {
  Tensor u;  // m x r, orthonormal columns
  Tensor s;  // r, non-increasing, non-negative
  Tensor v;  // n x r, orthonormal columns
  int sweeps = 0;
};

// Thin SVD by one-sided Jacobi rotations, r = min(m, n). Converges when every
// column pair is orthogonal to 1e-15 relative; gives up after
// 100 * max(m, n) sweeps with NumericError.
Svd svd(const Tensor& a);

// U diag(S) V^T.
Tensor svd_reconstruct(const Svd& f);

// Orthonormal basis of the column space of `a` (m x n, m >= n) via modified
// Gram-Schmidt with reorthogonalization. Deficient columns are completed with
// canonical basis vectors.
Tensor orthonormalize_columns(const Tensor& a);

void require_matrix(const Tensor& a, const char* what);

}  // namespace vidmamba
