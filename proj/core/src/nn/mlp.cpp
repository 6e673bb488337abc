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

#include "hitlbm/nn/mlp.hpp"

#include "hitlbm/error.hpp"
#include "hitlbm/nn/ops.hpp"

namespace hitlbm::nn {

Mlp::Mlp(std::string prefix, std::size_t input_dim, std::vector<std::size_t> hidden)
    : prefix_(std::move(prefix)), input_dim_(input_dim), hidden_(std::move(hidden)) {}

void Mlp::init(ParamStore& store, Rng& rng) const {
  std::size_t fan_in = input_dim_;
  for (std::size_t i = 0; i <= hidden_.size(); ++i) {
    const std::size_t fan_out = i < hidden_.size() ? hidden_[i] : 1;
    store.add(wname(i), glorot(fan_in, fan_out, rng));
    store.add(bname(i), Matrix(1, fan_out));
    fan_in = fan_out;
  }
}

Vector Mlp::forward(const ParamStore& store, const Matrix& x, Cache* cache) const {
  if (x.cols() != input_dim_) {
    throw DimensionError("mlp " + prefix_ + ": input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(input_dim_));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i <= hidden_.size(); ++i) {
    if (cache != nullptr) cache->inputs.push_back(h);
    Matrix z = affine(h, store.value(wname(i)), store.value(bname(i)).data());
    if (i < hidden_.size()) {
      if (cache != nullptr) cache->pre.push_back(z);
      h = relu(z);
    } else {
      h = std::move(z);
    }
  }
  return h.data();
}

Matrix Mlp::backward(ParamStore& store, const Cache& cache, std::span<const double> dlogits) const {
  Matrix dy(dlogits.size(), 1, Vector(dlogits.begin(), dlogits.end()));
  for (std::size_t i = hidden_.size() + 1; i-- > 0;) {
    const Matrix& w = store.value(wname(i));
    AffineGrads g = affine_backward(cache.inputs[i], w, dy);
    store.grad(wname(i)) += g.dw;
    auto& db = store.grad(bname(i)).data();
    for (std::size_t c = 0; c < db.size(); ++c) db[c] += g.db[c];
    dy = i > 0 ? relu_backward(cache.pre[i - 1], g.dx) : std::move(g.dx);
  }
  return dy;
}

}  // namespace hitlbm::nn
