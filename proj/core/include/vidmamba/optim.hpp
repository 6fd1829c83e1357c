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

#include <vector>

#include "vidmamba/temporal_mamba.hpp"

namespace vidmamba {

struct AdamOptions {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(NamedParams params, AdamOptions opts = {});

  // One update from the gradients currently held by the parameters.
  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }
  double lr() const { return opts_.lr; }
  void set_lr(double lr);
  const NamedParams& params() const { return params_; }

 private:
  NamedParams params_;
  AdamOptions opts_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace vidmamba
