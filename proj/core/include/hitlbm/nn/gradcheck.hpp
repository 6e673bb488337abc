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

#include <functional>
#include <span>

#include "hitlbm/nn/params.hpp"

namespace hitlbm::nn {

/// Relative error used by every gradient check: |a - fd| / max(1, |a|, |fd|).
double relative_error(double analytic, double numeric);

/// Central differences of `f` around `x`, compared coordinate-wise against
/// `analytic`. Returns the maximum relative error. h must lie in [1e-7, 1e-3].
double finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                         std::span<const double> analytic, double h);

/// Same check over every scalar of a ParamStore. `loss(true)` must populate
/// the store's gradients (they are zeroed first); `loss(false)` only evaluates.
double check_param_gradients(ParamStore& store, const std::function<double(bool)>& loss, double h);

}  // namespace hitlbm::nn
