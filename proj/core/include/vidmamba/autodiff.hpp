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
#include <limits>
#include <memory>
#include <vector>

#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Reverse-mode graph node. Each operation stores its output value, the nodes
// it read, and a closure that pushes the output adjoint into those nodes.
struct Node {
  Tensor value;
  Tensor grad;  // empty until an adjoint arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  // Exclusive-access in-place update (optimizer steps, finite differences).
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Zero tensor of the value's shape when no adjoint has arrived.
  Tensor grad() const;
  void zero_grad();
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op node. `backward` is only kept when some parent needs gradients.
Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(Node& self)> backward);

// Propagates d(root)/d(.) into every reachable node. `root` must be a scalar
// unless `seed` is given.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

namespace ad {

inline constexpr std::size_t kFill = std::numeric_limits<std::size_t>::max();

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// 1 - a, elementwise.
Var one_minus(const Var& a);
// a * s where s is a one-element Var.
Var scale_by(const Var& a, const Var& s);

Var matmul(const Var& a, const Var& b);
// x[L, C] + bias[C] broadcast over rows.
Var add_row_bias(const Var& x, const Var& bias);
// video[T, C, H, W] + bias[C] broadcast over frames and pixels.
Var add_channel_bias(const Var& video, const Var& bias);

Var silu(const Var& a);
Var sigmoid(const Var& a);

Var sum(const Var& a);
// mean((a - b)^2)
Var mse(const Var& a, const Var& b);
// sum(a * w) with a constant weight tensor.
Var weighted_sum(const Var& a, const Tensor& w);

Var reshape(const Var& a, Shape shape);
// out[i] = a[index[i]], or 0 where index[i] == kFill.
Var gather(const Var& a, std::vector<std::size_t> index, Shape shape);

// Pseudo-3D convolution: a 1x3x3 kernel applied to every frame independently
// with zero "same" padding. x[T, Cin, H, W], w[Cout, Cin, 3, 3], b[Cout].
Var conv_frames(const Var& x, const Var& w, const Var& b);

}  // namespace ad
}  // namespace vidmamba
