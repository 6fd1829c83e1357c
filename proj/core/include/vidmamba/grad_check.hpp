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

#include <functional>
#include <string>
#include <vector>

#include "vidmamba/autodiff.hpp"
#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Scalar function together with its claimed gradient.
struct Differentiable {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

// max_i |analytic_i - fd_i| / (|fd_i| + 1e-8), fd by central differences.
// Throws ArgumentError for step <= 0 and NumericError if f(x) is not finite.
double grad_check(const Differentiable& f, const Tensor& x, double step = 1e-5);

enum class Stencil { kSecondOrder, kFourthOrder };

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
};

// Checks d loss / d param for every named parameter by perturbing the
// parameter values in place. `loss` rebuilds the graph on each call.
// kFourthOrder uses the five-point central stencil.
std::vector<ParamCheck> grad_check_params(
    const std::function<Var()>& loss,
    const std::vector<std::pair<std::string, Var>>& params, double step = 1e-5,
    Stencil stencil = Stencil::kSecondOrder);

double worst(const std::vector<ParamCheck>& checks);

}  // namespace vidmamba
