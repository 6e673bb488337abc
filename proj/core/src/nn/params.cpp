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

#include "hitlbm/nn/params.hpp"

#include <cmath>

#include "hitlbm/error.hpp"

namespace hitlbm::nn {

Param& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw PreconditionError("duplicate parameter '" + name + "'");
  Param p;
  p.grad = Matrix(init.rows(), init.cols());
  p.m = Matrix(init.rows(), init.cols());
  p.v = Matrix(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw PreconditionError("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw PreconditionError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : params_) {
    j[name] = {{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", p.value.data()}};
  }
  return j;
}

void ParamStore::load_json(const nlohmann::json& j) {
  for (const auto& [name, entry] : j.items()) {
    Matrix m(entry.at("rows").get<std::size_t>(), entry.at("cols").get<std::size_t>(),
             entry.at("data").get<std::vector<double>>());
    if (contains(name)) {
      Param& p = at(name);
      require_shape(p.value.same_shape(m), ("load " + name).c_str(), p.value, m);
      p.value = std::move(m);
    } else {
      add(name, std::move(m));
    }
  }
}

ParamStore ParamStore::from_json(const nlohmann::json& j) {
  ParamStore s;
  s.load_json(j);
  return s;
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& x : m.data()) x = rng.uniform(-limit, limit);
  return m;
}

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = stddev * rng.normal();
  return m;
}

void Adam::step(ParamStore& store) {
  for (const auto& [name, p] : store.items()) {
    if (!p.grad.all_finite()) throw TrainingError("non-finite gradient in parameter '" + name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [_, p] : store.items()) {
    auto& w = p.value.data();
    const auto& g = p.grad.data();
    auto& m = p.m.data();
    auto& v = p.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace hitlbm::nn
