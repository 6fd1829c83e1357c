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

#include "vidmamba/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace vidmamba {

KeyGroups KeyGroups::dense(std::size_t queries, std::size_t keys) {
  KeyGroups g;
  g.query_group.assign(queries, 0);
  g.group_keys.resize(1);
  for (std::size_t j = 0; j < keys; ++j) g.group_keys[0].push_back(j);
  return g;
}

KeyGroups KeyGroups::sparse_causal(std::size_t frames, std::size_t per_frame) {
  KeyGroups g;
  g.query_group.resize(frames * per_frame);
  g.group_keys.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t p = 0; p < per_frame; ++p) g.query_group[t * per_frame + p] = t;
    auto& keys = g.group_keys[t];
    for (std::size_t p = 0; p < per_frame; ++p) keys.push_back(p);
    if (t > 0) {
      for (std::size_t p = 0; p < per_frame; ++p) keys.push_back((t - 1) * per_frame + p);
    }
  }
  return g;
}

KeyGroups KeyGroups::temporal(std::size_t frames, std::size_t per_frame) {
  KeyGroups g;
  g.query_group.resize(frames * per_frame);
  g.group_keys.resize(per_frame);
  for (std::size_t p = 0; p < per_frame; ++p) {
    for (std::size_t t = 0; t < frames; ++t) {
      g.query_group[t * per_frame + p] = p;
      g.group_keys[p].push_back(t * per_frame + p);
    }
  }
  return g;
}

namespace {

struct AttentionSaved {
  std::vector<double> weights;   // per term
  std::vector<std::size_t> row_offset;  // into probs, per query
  std::vector<double> probs;
};

void validate(const std::vector<ScoreTerm>& terms, const Var& v, const KeyGroups& groups) {
  if (terms.empty()) throw ArgumentError("grouped_attention: no score terms");
  const std::size_t lq = terms[0].q.shape().at(0);
  const std::size_t lk = v.shape().at(0);
  for (const ScoreTerm& t : terms) {
    if (t.weight.value().size() != 1) throw DimensionError("grouped_attention: weight must be scalar");
    if (t.q.value().rank() != 2 || t.k.value().rank() != 2 || t.q.shape()[0] != lq ||
        t.k.shape()[0] != lk || t.q.shape()[1] != t.k.shape()[1]) {
      throw DimensionError("grouped_attention: q " + shape_string(t.q.shape()) + ", k " +
                           shape_string(t.k.shape()) + ", v " + shape_string(v.shape()));
    }
  }
  if (groups.query_group.size() != lq) throw DimensionError("grouped_attention: group count");
  for (const auto& keys : groups.group_keys)
    for (std::size_t j : keys)
      if (j >= lk) throw DimensionError("grouped_attention: key index out of range");
}

}  // namespace

namespace ad {

Var grouped_attention(const std::vector<ScoreTerm>& terms, const Var& v,
                      const KeyGroups& groups, double scale) {
  validate(terms, v, groups);
  const std::size_t lq = terms[0].q.shape()[0];
  const std::size_t dv = v.shape()[1];
  const std::size_t nterms = terms.size();
  const Tensor& vv = v.value();

  bool need_grad = v.requires_grad();
  for (const ScoreTerm& t : terms) {
    need_grad |= t.weight.requires_grad() || t.q.requires_grad() || t.k.requires_grad();
  }

  auto saved = std::make_shared<AttentionSaved>();
  for (const ScoreTerm& t : terms) saved->weights.push_back(t.weight.value()[0]);

  Tensor out({lq, dv});
  std::vector<double> row;
  for (std::size_t i = 0; i < lq; ++i) {
    const auto& keys = groups.group_keys[groups.query_group[i]];
    row.assign(keys.size(), 0.0);
    for (std::size_t m = 0; m < nterms; ++m) {
      const Tensor& q = terms[m].q.value();
      const Tensor& k = terms[m].k.value();
      const std::size_t r = q.dim(1);
      const double* qi = &q[i * r];
      const double w = saved->weights[m];
      for (std::size_t jj = 0; jj < keys.size(); ++jj) {
        const double* kj = &k[keys[jj] * r];
        double d = 0.0;
        for (std::size_t c = 0; c < r; ++c) d += qi[c] * kj[c];
        row[jj] += w * d;
      }
    }
    double mx = -INFINITY;
    for (double& s : row) {
      s *= scale;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (double& s : row) {
      s = std::exp(s - mx);
      z += s;
    }
    double* o = &out[i * dv];
    for (std::size_t jj = 0; jj < keys.size(); ++jj) {
      const double p = row[jj] / z;
      row[jj] = p;
      const double* vj = &vv[keys[jj] * dv];
      for (std::size_t c = 0; c < dv; ++c) o[c] += p * vj[c];
    }
    if (need_grad) {
      saved->row_offset.push_back(saved->probs.size());
      saved->probs.insert(saved->probs.end(), row.begin(), row.end());
    }
  }
  if (!need_grad) return Var::constant(std::move(out));

  std::vector<Var> parents;
  for (const ScoreTerm& t : terms) {
    parents.push_back(t.weight);
    parents.push_back(t.q);
    parents.push_back(t.k);
  }
  parents.push_back(v);
  return make_op(std::move(out), std::move(parents),
                 [saved, groups, scale, nterms](Node& self) {
                   const Tensor& vv = self.parents[3 * nterms]->value;
                   const std::size_t dv = vv.dim(1);
                   const std::size_t lq = self.grad.dim(0);
                   Node* vnode = self.parents[3 * nterms].get();
                   Tensor* dvv = vnode->requires_grad ? &vnode->grad_buffer() : nullptr;
                   std::vector<Tensor*> dq(nterms, nullptr), dk(nterms, nullptr);
                   std::vector<double> dw(nterms, 0.0);
                   for (std::size_t m = 0; m < nterms; ++m) {
                     Node* qn = self.parents[3 * m + 1].get();
                     Node* kn = self.parents[3 * m + 2].get();
                     if (qn->requires_grad) dq[m] = &qn->grad_buffer();
                     if (kn->requires_grad) dk[m] = &kn->grad_buffer();
                   }
                   std::vector<double> dscore;
                   for (std::size_t i = 0; i < lq; ++i) {
                     const auto& keys = groups.group_keys[groups.query_group[i]];
                     const double* p = &saved->probs[saved->row_offset[i]];
                     const double* g = &self.grad[i * dv];
                     dscore.assign(keys.size(), 0.0);
                     double inner = 0.0;
                     for (std::size_t jj = 0; jj < keys.size(); ++jj) {
                       const double* vj = &vv[keys[jj] * dv];
                       double dp = 0.0;
                       for (std::size_t c = 0; c < dv; ++c) dp += g[c] * vj[c];
                       dscore[jj] = dp;
                       inner += p[jj] * dp;
                       if (dvv) {
                         double* dvj = &(*dvv)[keys[jj] * dv];
                         for (std::size_t c = 0; c < dv; ++c) dvj[c] += p[jj] * g[c];
                       }
                     }
                     for (std::size_t jj = 0; jj < keys.size(); ++jj) {
                       dscore[jj] = p[jj] * (dscore[jj] - inner) * scale;
                     }
                     for (std::size_t m = 0; m < nterms; ++m) {
                       const Tensor& q = self.parents[3 * m + 1]->value;
                       const Tensor& k = self.parents[3 * m + 2]->value;
                       const std::size_t r = q.dim(1);
                       const double w = saved->weights[m];
                       const double* qi = &q[i * r];
                       for (std::size_t jj = 0; jj < keys.size(); ++jj) {
                         const double ds = dscore[jj];
                         if (ds == 0.0) continue;
                         const double* kj = &k[keys[jj] * r];
                         double d = 0.0;
                         for (std::size_t c = 0; c < r; ++c) {
                           d += qi[c] * kj[c];
                           if (dq[m]) (*dq[m])[i * r + c] += ds * w * kj[c];
                           if (dk[m]) (*dk[m])[keys[jj] * r + c] += ds * w * qi[c];
                         }
                         dw[m] += ds * d;
                       }
                     }
                   }
                   for (std::size_t m = 0; m < nterms; ++m) {
                     Node* wn = self.parents[3 * m].get();
                     if (wn->requires_grad) wn->accumulate(Tensor(wn->value.shape(), dw[m]));
                   }
                 });
}

}  // namespace ad

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2) throw DimensionError("attention: Q must be a matrix");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  const std::vector<ScoreTerm> terms = {
      {Var::constant(Tensor::scalar(1.0)), Var::constant(q), Var::constant(k)}};
  return ad::grouped_attention(terms, Var::constant(v), KeyGroups::dense(q.dim(0), k.dim(0)),
                               scale)
      .value();
}

Tensor softmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw DimensionError("softmax_rows: expected a matrix");
  const std::size_t m = scores.dim(0), n = scores.dim(1);
  Tensor out = scores;
  for (std::size_t i = 0; i < m; ++i) {
    double* r = &out[i * n];
    const double mx = *std::max_element(r, r + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      z += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= z;
  }
  return out;
}

}  // namespace vidmamba
