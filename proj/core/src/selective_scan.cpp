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

#include "vidmamba/selective_scan.hpp"

#include <cmath>

#include "vidmamba/linalg.hpp"

namespace vidmamba {

double softplus(double u) {
  return u > 30.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double phi1(double z) {
  if (std::abs(z) < 1e-6) return 1.0 + z * (0.5 + z / 6.0);
  return std::expm1(z) / z;
}

double phi1_prime(double z) {
  if (std::abs(z) < 1e-3) {
    return 0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z / 144.0)));
  }
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

SelectiveParams SelectiveParams::init(std::size_t e, std::size_t n, Rng& rng) {
  SelectiveParams p;
  p.a_log = Tensor({e, n});
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t j = 0; j < n; ++j) p.a_log.at(i, j) = std::log(static_cast<double>(j + 1));
  const double s = 1.0 / std::sqrt(static_cast<double>(e));
  p.w_b = rng.normal_tensor({e, n}, s);
  p.b_b = Tensor({n});
  p.w_c = rng.normal_tensor({e, n}, s);
  p.b_c = Tensor({n});
  p.w_dt = rng.normal_tensor({e, e}, 0.1 * s);
  p.b_dt = Tensor({e});
  for (double& b : p.b_dt.data()) {
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    b = std::log(std::expm1(dt));  // inverse softplus
  }
  return p;
}

namespace {

void check(const SelectiveParams& p, const Tensor& x) {
  if (p.a_log.rank() != 2) throw DimensionError("selective_scan: a_log must be [E, N]");
  const std::size_t e = p.channels(), n = p.state_dim();
  if (x.rank() != 2 || x.dim(1) != e) {
    throw DimensionError("selective_scan: x " + shape_string(x.shape()) +
                         " does not have " + std::to_string(e) + " channels");
  }
  if (p.w_b.shape() != Shape{e, n} || p.w_c.shape() != Shape{e, n} ||
      p.b_b.size() != n || p.b_c.size() != n || p.w_dt.shape() != Shape{e, e} ||
      p.b_dt.size() != e) {
    throw DimensionError("selective_scan: inconsistent projection shapes");
  }
}

Tensor project(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor out = matmul(x, w);
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += bias[j];
  return out;
}

}  // namespace

Tensor selective_scan(const SelectiveParams& p, const Tensor& x, SelectiveCache* cache) {
  check(p, x);
  const std::size_t m = x.dim(0), e = p.channels(), n = p.state_dim();
  Tensor dt_pre = project(x, p.w_dt, p.b_dt);
  Tensor dt = dt_pre;
  for (double& v : dt.data()) {
    v = softplus(v);
    if (!(v > 0.0)) throw NumericError("selective_scan: step size underflowed to zero");
  }
  Tensor bm = project(x, p.w_b, p.b_b);
  Tensor cm = project(x, p.w_c, p.b_c);

  std::vector<double> a(e * n);
  for (std::size_t i = 0; i < e * n; ++i) a[i] = -std::exp(p.a_log[i]);

  Tensor y({m, e});
  std::vector<double> h(e * n, 0.0);
  Tensor states;
  if (cache) states = Tensor({m, e, n});
  for (std::size_t t = 0; t < m; ++t) {
    const double* brow = &bm[t * n];
    const double* crow = &cm[t * n];
    for (std::size_t ch = 0; ch < e; ++ch) {
      const double d = dt[t * e + ch];
      const double xv = x[t * e + ch];
      double* hs = &h[ch * n];
      const double* as = &a[ch * n];
      double out = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double z = d * as[s];
        hs[s] = std::exp(z) * hs[s] + d * phi1(z) * brow[s] * xv;
        out += crow[s] * hs[s];
      }
      y[t * e + ch] = out;
    }
    if (cache) std::copy(h.begin(), h.end(), &states[t * e * n]);
  }
  if (cache) {
    cache->dt_pre = std::move(dt_pre);
    cache->dt = std::move(dt);
    cache->b = std::move(bm);
    cache->c = std::move(cm);
    cache->states = std::move(states);
  }
  return y;
}

SelectiveGrads selective_scan_backward(const SelectiveParams& p, const Tensor& x,
                                       const SelectiveCache& cache, const Tensor& dy) {
  check(p, x);
  const std::size_t m = x.dim(0), e = p.channels(), n = p.state_dim();
  require_same_shape(dy, Tensor({m, e}), "selective_scan_backward dy");

  std::vector<double> a(e * n);
  for (std::size_t i = 0; i < e * n; ++i) a[i] = -std::exp(p.a_log[i]);

  Tensor dx({m, e}), ddt({m, e}), db({m, n}), dc({m, n}), da({e, n});
  std::vector<double> carry(e * n, 0.0);  // a_{t+1} * dh_{t+1}
  for (std::size_t t = m; t-- > 0;) {
    const double* brow = &cache.b[t * n];
    const double* crow = &cache.c[t * n];
    const double* hs_t = &cache.states[t * e * n];
    const double* hs_prev = t > 0 ? &cache.states[(t - 1) * e * n] : nullptr;
    for (std::size_t ch = 0; ch < e; ++ch) {
      const double d = cache.dt[t * e + ch];
      const double xv = x[t * e + ch];
      const double g_out = dy[t * e + ch];
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t k = ch * n + s;
        const double as = a[k];
        const double z = d * as;
        const double decay = std::exp(z);
        const double gain = d * phi1(z);
        const double dh = carry[k] + crow[s] * g_out;
        dc[t * n + s] += g_out * hs_t[k];
        const double h_prev = hs_prev ? hs_prev[k] : 0.0;
        const double d_decay = dh * h_prev;
        const double d_gain = dh * brow[s] * xv;
        db[t * n + s] += dh * gain * xv;
        dx[t * e + ch] += dh * gain * brow[s];
        // d gain / d dt = exp(dt A); d gain / d A = dt^2 phi1'(dt A).
        ddt[t * e + ch] += d_decay * decay * as + d_gain * decay;
        da[k] += d_decay * decay * d + d_gain * d * d * phi1_prime(z);
        carry[k] = dh * decay;
      }
    }
  }

  SelectiveGrads g;
  Tensor du = ddt;
  for (std::size_t i = 0; i < du.size(); ++i) {
    du[i] *= 1.0 / (1.0 + std::exp(-cache.dt_pre[i]));
  }
  g.params.w_dt = matmul_tn(x, du);
  g.params.w_b = matmul_tn(x, db);
  g.params.w_c = matmul_tn(x, dc);
  auto colsum = [m](const Tensor& t) {
    const std::size_t cols = t.dim(1);
    Tensor s({cols});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[j] += t[i * cols + j];
    return s;
  };
  g.params.b_dt = colsum(du);
  g.params.b_b = colsum(db);
  g.params.b_c = colsum(dc);
  g.params.a_log = Tensor({e, n});
  for (std::size_t k = 0; k < e * n; ++k) g.params.a_log[k] = da[k] * a[k];
  dx += matmul_nt(du, p.w_dt);
  dx += matmul_nt(db, p.w_b);
  dx += matmul_nt(dc, p.w_c);
  g.x = std::move(dx);
  return g;
}

SelectiveVars SelectiveVars::from(const SelectiveParams& p) {
  return {Var::parameter(p.a_log), Var::parameter(p.w_b), Var::parameter(p.b_b),
          Var::parameter(p.w_c),   Var::parameter(p.b_c), Var::parameter(p.w_dt),
          Var::parameter(p.b_dt)};
}

SelectiveParams SelectiveVars::snapshot() const {
  return {a_log.value(), w_b.value(), b_b.value(), w_c.value(),
          b_c.value(),   w_dt.value(), b_dt.value()};
}

void SelectiveVars::collect(const std::string& prefix,
                            std::vector<std::pair<std::string, Var>>& out) const {
  out.emplace_back(prefix + "a_log", a_log);
  out.emplace_back(prefix + "w_b", w_b);
  out.emplace_back(prefix + "b_b", b_b);
  out.emplace_back(prefix + "w_c", w_c);
  out.emplace_back(prefix + "b_c", b_c);
  out.emplace_back(prefix + "w_dt", w_dt);
  out.emplace_back(prefix + "b_dt", b_dt);
}

namespace ad {

Var selective_scan(const Var& x, const SelectiveVars& p) {
  const SelectiveParams params = p.snapshot();
  auto cache = std::make_shared<SelectiveCache>();
  Tensor y = vidmamba::selective_scan(params, x.value(), cache.get());
  return make_op(std::move(y), {x, p.a_log, p.w_b, p.b_b, p.w_c, p.b_c, p.w_dt, p.b_dt},
                 [params, cache](Node& self) {
                   const Tensor& xv = self.parents[0]->value;
                   SelectiveGrads g = selective_scan_backward(params, xv, *cache, self.grad);
                   const Tensor* parts[] = {&g.x,          &g.params.a_log, &g.params.w_b,
                                            &g.params.b_b, &g.params.w_c,   &g.params.b_c,
                                            &g.params.w_dt, &g.params.b_dt};
                   for (std::size_t i = 0; i < 8; ++i) {
                     if (self.parents[i]->requires_grad) {
                       self.parents[i]->accumulate(parts[i]->reshaped(self.parents[i]->value.shape()));
                     }
                   }
                 });
}

}  // namespace ad
}  // namespace vidmamba
