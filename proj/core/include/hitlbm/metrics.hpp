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

namespace hitlbm::metrics {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half. Labels are 0/1.
/// Throws UndefinedAuc if either class is absent.
double auc(std::span<const double> scores, std::span<const double> labels);

/// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
double logloss(std::span<const double> preds, std::span<const double> labels);

}  // namespace hitlbm::metrics
