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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/behavior.hpp"

namespace hitlbm::synth {

enum class DriftKind { switch_at, random_walk };

struct Drift {
  DriftKind kind = DriftKind::switch_at;
  std::size_t switch_chunk = 4;  // switch_at: first chunk (1-based) of the new preference
  double sigma = 0.5;            // random_walk: per-chunk logit step stddev
};

struct SynthConfig {
  std::size_t n_categories = 10;
  std::size_t n_items = 500;
  std::size_t n_users = 200;
  std::size_t chunks_per_user = 8;
  std::size_t chunk_len = 25;
  Drift drift;
  double noise = 0.1;
  std::uint64_t seed = 7;
  /// Zipf exponent of the prior over which categories users prefer; 0 makes
  /// every category equally likely to be someone's interest.
  double preference_skew = 1.0;

  /// Throws ConfigError on invalid settings.
  void validate() const;
};

/// Per-user true category distribution of every chunk.
struct GroundTruthTrace {
  std::string user_id;
  std::vector<std::vector<double>> per_chunk_dist;
};

struct CatalogItem {
  std::string item_id;
  std::string title;
  std::size_t category = 0;
};

struct Dataset {
  std::vector<behavior::Interaction> interactions;  // user-major, time-ordered
  std::vector<GroundTruthTrace> traces;
  std::vector<CatalogItem> catalog;
};

Dataset generate_dataset(const SynthConfig& cfg);

/// Probability mass of the chunk's true distribution covered by the category
/// tokens mentioned in `interest_text`. chunk_index is 1-based.
double ground_truth_overlap(const std::string& interest_text, const GroundTruthTrace& trace, std::size_t chunk_index);

nlohmann::json interaction_record(const behavior::Interaction& x);
/// One record per (user, chunk): {"user_id", "chunk_index", "dist"}.
std::vector<nlohmann::json> ground_truth_records(const GroundTruthTrace& trace);
/// Inverse of ground_truth_records over a whole file's records.
std::vector<GroundTruthTrace> traces_from_records(const std::vector<nlohmann::json>& records);

}  // namespace hitlbm::synth
