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

#include "vidmamba/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "vidmamba/attention.hpp"
#include "vidmamba/harness/report.hpp"
#include "vidmamba/rng.hpp"
#include "vidmamba/selective_scan.hpp"

namespace vidmamba::harness {
namespace {

template <typename Fn>
double median_time(std::size_t warmup, std::size_t repeats, Fn&& fn) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> times;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return median(times);
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BenchResult run_bench(const BenchOptions& opts) {
  if (opts.lengths.empty()) throw ArgumentError("bench: no lengths");
  if (!std::is_sorted(opts.lengths.begin(), opts.lengths.end())) {
    throw ArgumentError("bench: lengths must be ascending");
  }
  if (opts.repeats < 1) throw ArgumentError("bench: repeats must be positive");
  Rng rng(opts.seed, 8000);
  const SelectiveParams sp = SelectiveParams::init(opts.channels, opts.state_dim, rng);
  BenchResult r;
  std::vector<double> xs, scan_t, attn_t;
  for (std::size_t len : opts.lengths) {
    const Tensor x = rng.normal_tensor({len, opts.channels});
    double sink = 0.0;
    const double ts = median_time(opts.warmup, opts.repeats, [&] {
      sink += selective_scan(sp, x)[0];
    });
    const Var q = Var::constant(rng.normal_tensor({len, opts.attn_width}));
    const Var k = Var::constant(rng.normal_tensor({len, opts.attn_width}));
    const Var v = Var::constant(rng.normal_tensor({len, opts.attn_width}));
    const KeyGroups groups = KeyGroups::dense(len, len);
    const std::vector<ScoreTerm> terms{{Var::constant(Tensor::scalar(1.0)), q, k}};
    const double ta = median_time(opts.warmup, opts.repeats, [&] {
      sink += ad::grouped_attention(terms, v, groups, 1.0 / std::sqrt(double(opts.attn_width)))
                  .value()[0];
    });
    if (!std::isfinite(sink)) throw NumericError("bench: non-finite kernel output");
    r.points.push_back({"selective_scan", len, ts});
    r.points.push_back({"attention", len, ta});
    xs.push_back(static_cast<double>(len));
    scan_t.push_back(ts);
    attn_t.push_back(ta);
  }
  r.scan_slope = loglog_slope(xs, scan_t);
  r.attention_slope = loglog_slope(xs, attn_t);
  return r;
}

}  // namespace vidmamba::harness
