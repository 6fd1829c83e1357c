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

#include "vidmamba/optim.hpp"

#include <cmath>

namespace vidmamba {

Adam::Adam(NamedParams params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
  if (!(opts_.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  for (auto& [name, v] : params_) {
    if (!v.requires_grad()) throw ArgumentError("adam: '" + name + "' is not trainable");
    m_.emplace_back(v.shape());
    v_.emplace_back(v.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Var& var = params_[p].second;
    if (!var.has_grad()) continue;
    const Tensor& g = var.node()->grad;
    Tensor& w = var.mutable_value();
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      w[i] -= opts_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps);
    }
  }
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ArgumentError("Adam: lr must be positive");
  opts_.lr = lr;
}

void Adam::zero_grad() {
  for (auto& [name, v] : params_) v.zero_grad();
}

}  // namespace vidmamba
