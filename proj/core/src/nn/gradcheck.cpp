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

#include "hitlbm/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hitlbm/error.hpp"

namespace hitlbm::nn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                         std::span<const double> analytic, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw PreconditionError("finite_diff_check: step outside [1e-7, 1e-3]");
  if (x.size() != analytic.size()) throw DimensionError("finite_diff_check: gradient length mismatch");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double check_param_gradients(ParamStore& store, const std::function<double(bool)>& loss, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw PreconditionError("check_param_gradients: step outside [1e-7, 1e-3]");
  store.zero_grad();
  loss(true);
  double worst = 0.0;
  for (auto& [name, p] : store.items()) {
    const std::vector<double> analytic = p.grad.data();
    auto& w = p.value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double up = loss(false);
      w[i] = orig - h;
      const double down = loss(false);
      w[i] = orig;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace hitlbm::nn
