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

#include "vidmamba/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vidmamba {
namespace {

thread_local std::uint64_t g_multiplies = 0;

double norm1(const Tensor& a) {
  const std::size_t n = a.dim(0), m = a.dim(1);
  double best = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a.at(i, j));
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

std::uint64_t multiply_count() { return g_multiplies; }
void reset_multiply_count() { g_multiplies = 0; }
void add_multiply_count(std::uint64_t n) { g_multiplies += n; }

void require_matrix(const Tensor& a, const char* what) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected a matrix, got " +
                         shape_string(a.shape()));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
  if (b.dim(0) != n) {
    throw DimensionError("matmul: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = &c[i * p];
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      const double* brow = &b[k * p];
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
  g_multiplies += m * n * p;
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t n = a.dim(0), m = a.dim(1), p = b.dim(1);
  if (b.dim(0) != n) {
    throw DimensionError("matmul_tn: " + shape_string(a.shape()) + "^T x " +
                         shape_string(b.shape()));
  }
  Tensor c({m, p});
  for (std::size_t k = 0; k < n; ++k) {
    const double* arow = &a[k * m];
    const double* brow = &b[k * p];
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = arow[i];
      double* crow = &c[i * p];
      for (std::size_t j = 0; j < p; ++j) crow[j] += aki * brow[j];
    }
  }
  g_multiplies += m * n * p;
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(0);
  if (b.dim(1) != n) {
    throw DimensionError("matmul_nt: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &a[i * n];
    for (std::size_t j = 0; j < p; ++j) {
      const double* brow = &b[j * n];
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += arow[k] * brow[k];
      c[i * p + j] = s;
    }
  }
  g_multiplies += m * n * p;
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

Tensor diag(const Tensor& v) {
  const std::size_t n = v.size();
  Tensor d({n, n});
  for (std::size_t i = 0; i < n; ++i) d.at(i, i) = v[i];
  return d;
}

Tensor expm(const Tensor& a) {
  require_matrix(a, "expm");
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) throw DimensionError("expm: matrix must be square");
  if (!a.all_finite()) throw NumericError("expm: non-finite input");

  const double nrm = norm1(a);
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Tensor x = a * std::ldexp(1.0, -squarings);

  // Horner evaluation of sum_{j<=18} x^j / j!; ||x|| <= 1/2 makes the
  // truncation error below 1e-22.
  constexpr int kDegree = 18;
  Tensor result = Tensor::identity(n);
  for (int j = kDegree; j >= 1; --j) {
    result = matmul(x, result) * (1.0 / j);
    for (std::size_t i = 0; i < n; ++i) result.at(i, i) += 1.0;
  }
  for (int s = 0; s < squarings; ++s) result = matmul(result, result);
  if (!result.all_finite()) {
    throw NumericError("expm: overflow after " + std::to_string(squarings) +
                       " squarings");
  }
  return result;
}

Tensor solve(const Tensor& a, const Tensor& b, double singular_tol) {
  require_matrix(a, "solve");
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) throw DimensionError("solve: matrix must be square");
  const bool vec = b.rank() == 1;
  const std::size_t cols = vec ? 1 : b.dim(1);
  if ((vec ? b.dim(0) : b.dim(0)) != n) throw DimensionError("solve: rhs rows");

  Tensor lu = a;
  Tensor x = b.reshaped({n, cols});
  const double scale = std::max(max_abs(a), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu.at(i, k)) > std::abs(lu.at(piv, k))) piv = i;
    if (std::abs(lu.at(piv, k)) <= singular_tol * scale) {
      throw NumericError("solve: singular pivot at column " +
                         std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu.at(k, j), lu.at(piv, j));
      for (std::size_t j = 0; j < cols; ++j) std::swap(x.at(k, j), x.at(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu.at(i, k) / lu.at(k, k);
      lu.at(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) lu.at(i, j) -= f * lu.at(k, j);
      for (std::size_t j = 0; j < cols; ++j) x.at(i, j) -= f * x.at(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = x.at(kk, j);
      for (std::size_t i = kk + 1; i < n; ++i) s -= lu.at(kk, i) * x.at(i, j);
      x.at(kk, j) = s / lu.at(kk, kk);
    }
  }
  return vec ? x.reshaped({n}) : x;
}

Tensor orthonormalize_columns(const Tensor& a) {
  require_matrix(a, "orthonormalize_columns");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (n > m) throw DimensionError("orthonormalize_columns: more columns than rows");
  Tensor q({m, n});
  std::size_t next_canonical = 0;
  auto project_out = [&](std::vector<double>& col, std::size_t upto) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < upto; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < m; ++i) d += q.at(i, k) * col[i];
        for (std::size_t i = 0; i < m; ++i) col[i] -= d * q.at(i, k);
      }
    }
  };
  const double scale = std::max(max_abs(a), 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col(m);
    for (std::size_t i = 0; i < m; ++i) col[i] = a.at(i, j);
    project_out(col, j);
    double nrm = std::sqrt(std::inner_product(col.begin(), col.end(), col.begin(), 0.0));
    while (nrm <= 1e-10 * scale && next_canonical < m) {
      std::fill(col.begin(), col.end(), 0.0);
      col[next_canonical++] = 1.0;
      project_out(col, j);
      nrm = std::sqrt(std::inner_product(col.begin(), col.end(), col.begin(), 0.0));
    }
    for (std::size_t i = 0; i < m; ++i) q.at(i, j) = col[i] / nrm;
  }
  return q;
}

Svd svd(const Tensor& input) {
  require_matrix(input, "svd");
  if (!input.all_finite()) throw NumericError("svd: non-finite input");
  const bool flipped = input.dim(0) < input.dim(1);
  // Work on a tall matrix; a wide one is handled through its transpose.
  Tensor w = flipped ? transpose(input) : input;
  const std::size_t m = w.dim(0), n = w.dim(1);
  Tensor v = Tensor::identity(n);

  const int max_sweeps = static_cast<int>(100 * std::max(m, n));
  int sweep = 0;
  for (;; ++sweep) {
    if (sweep >= max_sweeps) {
      throw NumericError("svd: no convergence after " + std::to_string(sweep) +
                         " sweeps");
    }
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w.at(i, p), wq = w.at(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w.at(i, p), wq = w.at(i, q);
          w.at(i, p) = c * wp - s * wq;
          w.at(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v.at(i, p), vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w.at(i, j) * w.at(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = n ? norms[order[0]] : 0.0;
  Tensor u({m, n}), s({n}), vs({n, n});
  std::size_t rank = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    s[k] = norms[j];
    for (std::size_t i = 0; i < n; ++i) vs.at(i, k) = v.at(i, j);
    const bool negligible = norms[j] == 0.0 || norms[j] <= 1e-14 * smax;
    if (!negligible) {
      for (std::size_t i = 0; i < m; ++i) u.at(i, k) = w.at(i, j) / norms[j];
      ++rank;
    }
  }
  // Null directions get an orthonormal completion so U keeps orthonormal
  // columns even for rank-deficient input.
  if (rank < n) {
    Tensor head({m, rank});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < rank; ++k) head.at(i, k) = u.at(i, k);
    Tensor padded({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < rank; ++k) padded.at(i, k) = head.at(i, k);
    u = orthonormalize_columns(padded);
  }

  Svd out;
  out.sweeps = sweep + 1;
  out.s = std::move(s);
  if (flipped) {
    out.u = std::move(vs);
    out.v = std::move(u);
  } else {
    out.u = std::move(u);
    out.v = std::move(vs);
  }
  return out;
}

Tensor svd_reconstruct(const Svd& f) {
  Tensor us = f.u;
  const std::size_t m = us.dim(0), r = us.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < r; ++k) us.at(i, k) *= f.s[k];
  return matmul_nt(us, f.v);
}

}  // namespace vidmamba
