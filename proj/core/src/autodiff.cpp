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

#include "vidmamba/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "vidmamba/linalg.hpp"

namespace vidmamba {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Tensor Var::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return Tensor(node_->value.shape());
}

void Var::zero_grad() { node_->grad = Tensor(); }

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(Node& self)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) n->requires_grad |= p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw DimensionError("backward: root must be a scalar, got " +
                         shape_string(root.shape()));
  }
  backward(root, Tensor(root.shape(), 1.0));
}

void backward(const Var& root, const Tensor& seed) {
  require_same_shape(root.value(), seed, "backward seed");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

namespace ad {
namespace {

bool wants(const Node& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ad::add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad);
    if (wants(self, 1)) self.parents[1]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ad::sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad);
    if (wants(self, 1)) self.parents[1]->accumulate(self.grad * -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  return make_op(hadamard(a.value(), b.value()), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) self.parents[0]->accumulate(hadamard(self.grad, bv));
    if (wants(self, 1)) self.parents[1]->accumulate(hadamard(self.grad, av));
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) {
    self.parents[0]->accumulate(self.grad * s);
  });
}

Var one_minus(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 - v;
  return make_op(std::move(out), {a}, [](Node& self) {
    self.parents[0]->accumulate(self.grad * -1.0);
  });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw DimensionError("scale_by: scale must be a scalar");
  const double sv = s.value()[0];
  return make_op(a.value() * sv, {a, s}, [sv](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad * sv);
    if (wants(self, 1)) {
      Tensor g({1}, dot(self.grad, self.parents[0]->value));
      self.parents[1]->accumulate(g.reshaped(self.parents[1]->value.shape()));
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  return make_op(vidmamba::matmul(a.value(), b.value()), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      self.parents[0]->accumulate(matmul_nt(self.grad, self.parents[1]->value));
    }
    if (wants(self, 1)) {
      self.parents[1]->accumulate(matmul_tn(self.parents[0]->value, self.grad));
    }
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  require_matrix(x.value(), "add_row_bias");
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  if (bias.value().size() != cols) throw DimensionError("add_row_bias: bias width");
  Tensor out = x.value();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += bias.value()[j];
  return make_op(std::move(out), {x, bias}, [rows, cols](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor& gb = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gb[j] += self.grad[i * cols + j];
    }
  });
}

Var add_channel_bias(const Var& video, const Var& bias) {
  const Tensor& v = video.value();
  if (v.rank() != 4) throw DimensionError("add_channel_bias: expected a video");
  const std::size_t frames = v.dim(0), channels = v.dim(1);
  const std::size_t plane = v.dim(2) * v.dim(3);
  if (bias.value().size() != channels) throw DimensionError("add_channel_bias: bias width");
  Tensor out = v;
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = &out[(t * channels + c) * plane];
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias.value()[c];
    }
  return make_op(std::move(out), {video, bias}, [frames, channels, plane](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor& gb = self.parents[1]->grad_buffer();
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t c = 0; c < channels; ++c) {
          const double* g = &self.grad[(t * channels + c) * plane];
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += g[i];
          gb[c] += s;
        }
    }
  });
}

Var silu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v / (1.0 + std::exp(-v));
  return make_op(std::move(out), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x[i]));
      g[i] += self.grad[i] * s * (1.0 + x[i] * (1.0 - s));
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return make_op(std::move(out), {a}, [saved = std::move(saved)](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      g[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
    }
  });
}

Var sum(const Var& a) {
  return make_op(Tensor::scalar(vidmamba::sum(a.value())), {a}, [](Node& self) {
    self.parents[0]->accumulate(Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var mse(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ad::mse");
  const Tensor diff = a.value() - b.value();
  const double n = static_cast<double>(diff.size());
  return make_op(Tensor::scalar(dot(diff, diff) / n), {a, b},
                 [diff, n](Node& self) {
                   const Tensor g = diff * (2.0 * self.grad[0] / n);
                   if (wants(self, 0)) self.parents[0]->accumulate(g);
                   if (wants(self, 1)) self.parents[1]->accumulate(g * -1.0);
                 });
}

Var weighted_sum(const Var& a, const Tensor& w) {
  require_same_shape(a.value(), w, "ad::weighted_sum");
  return make_op(Tensor::scalar(dot(a.value(), w)), {a}, [w](Node& self) {
    self.parents[0]->accumulate(w * self.grad[0]);
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_op(std::move(out), {a}, [](Node& self) {
    self.parents[0]->accumulate(self.grad.reshaped(self.parents[0]->value.shape()));
  });
}

Var gather(const Var& a, std::vector<std::size_t> index, Shape shape) {
  if (shape_numel(shape) != index.size()) throw DimensionError("gather: index count");
  const Tensor& src = a.value();
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] == kFill) continue;
    if (index[i] >= src.size()) throw DimensionError("gather: index out of range");
    out[i] = src[index[i]];
  }
  return make_op(std::move(out), {a}, [index = std::move(index)](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] != kFill) g[index[i]] += self.grad[i];
    }
  });
}

Var conv_frames(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(2) != 3 || wv.dim(3) != 3 ||
      wv.dim(1) != xv.dim(1) || b.value().size() != wv.dim(0)) {
    throw DimensionError("conv_frames: x " + shape_string(xv.shape()) + ", w " +
                         shape_string(wv.shape()));
  }
  const std::size_t frames = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const std::size_t cout = wv.dim(0);
  Tensor out({frames, cout, h, wd});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t co = 0; co < cout; ++co) {
      const double bias = b.value()[co];
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double s = bias;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t di = 0; di < 3; ++di) {
              const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + di) - 1;
              if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t dj = 0; dj < 3; ++dj) {
                const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + dj) - 1;
                if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                s += wv.at(co, ci, di, dj) * xv.at(t, ci, ii, jj);
              }
            }
          out.at(t, co, i, j) = s;
        }
    }
  return make_op(std::move(out), {x, w, b},
                 [frames, cin, cout, h, wd](Node& self) {
                   const Tensor& xv = self.parents[0]->value;
                   const Tensor& wv = self.parents[1]->value;
                   const Tensor& g = self.grad;
                   const bool gx = wants(self, 0), gw = wants(self, 1), gb = wants(self, 2);
                   Tensor* dx = gx ? &self.parents[0]->grad_buffer() : nullptr;
                   Tensor* dw = gw ? &self.parents[1]->grad_buffer() : nullptr;
                   Tensor* db = gb ? &self.parents[2]->grad_buffer() : nullptr;
                   for (std::size_t t = 0; t < frames; ++t)
                     for (std::size_t co = 0; co < cout; ++co)
                       for (std::size_t i = 0; i < h; ++i)
                         for (std::size_t j = 0; j < wd; ++j) {
                           const double go = g.at(t, co, i, j);
                           if (db) (*db)[co] += go;
                           if (go == 0.0) continue;
                           for (std::size_t ci = 0; ci < cin; ++ci)
                             for (std::size_t di = 0; di < 3; ++di) {
                               const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + di) - 1;
                               if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                               for (std::size_t dj = 0; dj < 3; ++dj) {
                                 const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + dj) - 1;
                                 if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                                 if (dw) dw->at(co, ci, di, dj) += go * xv.at(t, ci, ii, jj);
                                 if (dx) dx->at(t, ci, ii, jj) += go * wv.at(co, ci, di, dj);
                               }
                             }
                         }
                 });
}

}  // namespace ad
}  // namespace vidmamba
