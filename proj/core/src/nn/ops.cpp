// Copyright 2026 The hitlbm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hitlbm/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "hitlbm/error.hpp"

namespace hitlbm::nn {

Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> b) {
  require_shape(x.cols() == w.rows(), "affine", x, w);
  if (b.size() != w.cols()) {
    throw DimensionError("affine: bias length " + std::to_string(b.size()) + " does not match weight " +
                         w.shape_str());
  }
  Matrix y = matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  require_shape(dy.rows() == x.rows() && dy.cols() == w.cols(), "affine_backward", x, dy);
  AffineGrads g;
  g.dx = matmul_nt(dy, w);
  g.dw = matmul_tn(x, dy);
  g.db.assign(dy.cols(), 0.0);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) g.db[c] += row[c];
  }
  return g;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& pre, const Matrix& dy) {
  require_shape(pre.same_shape(dy), "relu_backward", pre, dy);
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (pre.data()[i] <= 0.0) dx.data()[i] = 0.0;
  }
  return dx;
}

Matrix causal_mask(std::size_t t) {
  Matrix m(t, t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j) m(i, j) = 1.0;
  return m;
}

Matrix masked_softmax(const Matrix& scores, const Matrix* mask) {
  if (mask != nullptr) require_shape(scores.same_shape(*mask), "masked_softmax", scores, *mask);
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto in = scores.row(r);
    auto o = out.row(r);
    bool any_visible = false;
    for (std::size_t c = 0; c < in.size(); ++c) {
      const bool hidden = mask != nullptr && (*mask)(r, c) != 0.0;
      o[c] = hidden ? in[c] + kMaskValue : in[c];
      any_visible = any_visible || !hidden;
    }
    if (!any_visible) {
      throw PreconditionError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    }
    const double mx = *std::max_element(o.begin(), o.end());
    double z = 0.0;
    for (double& v : o) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : o) v /= z;
  }
  return out;
}

Matrix softmax_backward(const Matrix& probs, const Matrix& dprobs) {
  require_shape(probs.same_shape(dprobs), "softmax_backward", probs, dprobs);
  Matrix ds(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const double inner = dot(probs.row(r), dprobs.row(r));
    for (std::size_t c = 0; c < probs.cols(); ++c) ds(r, c) = probs(r, c) * (dprobs(r, c) - inner);
  }
  return ds;
}

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix* mask) {
  require_shape(q.cols() == k.cols(), "attention(Q,K)", q, k);
  require_shape(k.rows() == v.rows(), "attention(K,V)", k, v);
  if (k.cols() == 0) throw DimensionError("attention: key dimension is zero");
  AttentionResult res;
  res.cache.scale = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  Matrix scores = matmul_nt(q, k) * res.cache.scale;
  res.cache.probs = masked_softmax(scores, mask);
  res.out = matmul(res.cache.probs, v);
  res.cache.q = q;
  res.cache.k = k;
  res.cache.v = v;
  return res;
}

AttentionGrads attention_backward(const AttentionCache& cache, const Matrix& dout) {
  require_shape(dout.rows() == cache.probs.rows() && dout.cols() == cache.v.cols(), "attention_backward",
                cache.probs, dout);
  AttentionGrads g;
  g.dv = matmul_tn(cache.probs, dout);
  const Matrix dprobs = matmul_nt(dout, cache.v);
  Matrix dscores = softmax_backward(cache.probs, dprobs);
  dscores *= cache.scale;
  g.dq = matmul(dscores, cache.k);
  g.dk = matmul_tn(dscores, cache.q);
  return g;
}

LossResult bce_loss(std::span<const double> pred, std::span<const double> label) {
  if (pred.size() != label.size()) {
    throw DimensionError("bce_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(label.size()) + " labels");
  }
  LossResult r;
  r.grad.assign(pred.size(), 0.0);
  if (pred.empty()) return r;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = label[i];
    r.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    r.grad[i] = (p - y) / (p * (1.0 - p)) / n;
  }
  r.loss /= n;
  return r;
}

LossResult bce_with_logits(std::span<const double> logits, std::span<const double> label) {
  if (logits.size() != label.size()) {
    throw DimensionError("bce_with_logits: " + std::to_string(logits.size()) + " logits vs " +
                         std::to_string(label.size()) + " labels");
  }
  LossResult r;
  r.grad.assign(logits.size(), 0.0);
  if (logits.empty()) return r;
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = label[i];
    // softplus(z) - y z, written to avoid overflow for large |z|
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    r.loss += softplus - y * z;
    r.grad[i] = (sigmoid(z) - y) / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace hitlbm::nn
