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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "hitlbm/nn/params.hpp"

namespace hitlbm::nn {

/// Feed-forward ReLU network ending in a single logit. Parameters live in an
/// external ParamStore under `<prefix>/w<i>` and `<prefix>/b<i>`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::size_t input_dim, std::vector<std::size_t> hidden);

  void init(ParamStore& store, Rng& rng) const;

  struct Cache {
    std::vector<Matrix> inputs;  // input to each affine layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
  };

  /// One logit per row of x.
  Vector forward(const ParamStore& store, const Matrix& x, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `store` and returns dL/dx.
  Matrix backward(ParamStore& store, const Cache& cache, std::span<const double> dlogits) const;

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string wname(std::size_t i) const { return prefix_ + "/w" + std::to_string(i); }
  std::string bname(std::size_t i) const { return prefix_ + "/b" + std::to_string(i); }

  std::string prefix_;
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> hidden_;
};

}  // namespace hitlbm::nn
