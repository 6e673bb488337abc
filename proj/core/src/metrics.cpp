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

#include "hitlbm/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "hitlbm/error.hpp"
#include "hitlbm/nn/ops.hpp"

namespace hitlbm::metrics {

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk groups of equal score in ascending order. Counts stay integral, so the
  // only rounding happens in the final division.
  double wins = 0.0;
  double ties = 0.0;
  double neg_below = 0.0;
  double total_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0;
    double neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 0.5) {
        pos += 1.0;
      } else {
        neg += 1.0;
      }
      ++j;
    }
    wins += pos * neg_below;
    ties += pos * neg;
    neg_below += neg;
    total_pos += pos;
    i = j;
  }
  if (total_pos == 0.0 || neg_below == 0.0) {
    throw UndefinedAuc("auc undefined: " + std::to_string(static_cast<long>(total_pos)) + " positives, " +
                       std::to_string(static_cast<long>(neg_below)) + " negatives");
  }
  return (2.0 * wins + ties) / (2.0 * total_pos * neg_below);
}

double logloss(std::span<const double> preds, std::span<const double> labels) {
  return nn::bce_loss(preds, labels).loss;
}

}  // namespace hitlbm::metrics
