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

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "hitlbm/nn/matrix.hpp"
#include "hitlbm/rng.hpp"

namespace hitlbm::nn {

struct Param {
  Matrix value;
  Matrix grad;
  Matrix m;  // first moment
  Matrix v;  // second moment
};

/// Named parameters with gradient buffers and optimizer state. Iteration
/// order is the lexicographic name order, which fixes every reduction order.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  Matrix& value(const std::string& name) { return at(name).value; }
  const Matrix& value(const std::string& name) const { return at(name).value; }
  Matrix& grad(const std::string& name) { return at(name).grad; }

  void zero_grad();
  std::size_t num_scalars() const;

  std::map<std::string, Param>& items() { return params_; }
  const std::map<std::string, Param>& items() const { return params_; }

  /// {name: {rows, cols, data}}
  nlohmann::json to_json() const;
  /// Replaces values for the names present in `j`; shapes must match when the
  /// name already exists.
  void load_json(const nlohmann::json& j);
  static ParamStore from_json(const nlohmann::json& j);

 private:
  std::map<std::string, Param> params_;
};

/// Glorot-uniform initialised matrix.
Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// Entries drawn from N(0, stddev²).
Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update using the gradients currently in `store`. Throws
  /// hitlbm::TrainingError naming the parameter if a gradient is not finite.
  void step(ParamStore& store);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace hitlbm::nn
