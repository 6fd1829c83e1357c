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

#include "vidmamba/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace vidmamba {
namespace {

constexpr double kFloor = 1e-8;

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(numeric) + kFloor);
}

}  // namespace

double grad_check(const Differentiable& f, const Tensor& x, double step) {
  if (!(step > 0.0)) throw ArgumentError("grad_check: step must be positive");
  const double f0 = f.value(x);
  if (!std::isfinite(f0)) throw NumericError("grad_check: f(x) is not finite");
  const Tensor analytic = f.gradient(x);
  require_same_shape(analytic, x, "grad_check gradient");

  Tensor probe = x;
  double worst_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = f.value(probe);
    probe[i] = orig - step;
    const double fm = f.value(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite value near coordinate " +
                         std::to_string(i));
    }
    worst_err = std::max(worst_err, rel_error(analytic[i], (fp - fm) / (2.0 * step)));
  }
  return worst_err;
}

std::vector<ParamCheck> grad_check_params(
    const std::function<Var()>& loss,
    const std::vector<std::pair<std::string, Var>>& params, double step,
    Stencil stencil) {
  if (!(step > 0.0)) throw ArgumentError("grad_check_params: step must be positive");
  for (auto [name, p] : params) p.zero_grad();
  const Var root = loss();
  if (!std::isfinite(root.value()[0])) {
    throw NumericError("grad_check_params: loss is not finite");
  }
  backward(root);

  std::vector<ParamCheck> out;
  for (auto [name, p] : params) {
    const Tensor analytic = p.grad();
    double worst_err = 0.0;
    Tensor& v = p.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      const auto at = [&](double offset) {
        v[i] = orig + offset;
        return loss().value()[0];
      };
      double numeric = 0.0;
      if (stencil == Stencil::kSecondOrder) {
        numeric = (at(step) - at(-step)) / (2.0 * step);
      } else {
        numeric = (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) /
                  (12.0 * step);
      }
      v[i] = orig;
      worst_err = std::max(worst_err, rel_error(analytic[i], numeric));
    }
    out.push_back({name, worst_err});
  }
  for (auto [name, p] : params) p.zero_grad();
  return out;
}

double worst(const std::vector<ParamCheck>& checks) {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.max_rel_error);
  return w;
}

}  // namespace vidmamba
