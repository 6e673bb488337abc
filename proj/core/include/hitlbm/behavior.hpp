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
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hitlbm::behavior {

/// One timestamped, labelled user-item event.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::string title;
  std::map<std::string, std::string> attrs;
  double rating = 0.0;
  std::int64_t ts = 0;
  int label = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// A window of at most L consecutive interactions of one user. `index` is 1-based.
struct BehaviorChunk {
  std::string user_id;
  std::size_t index = 1;
  std::vector<Interaction> items;

  friend bool operator==(const BehaviorChunk&, const BehaviorChunk&) = default;
};

struct ChunkSequence {
  std::string user_id;
  std::vector<BehaviorChunk> chunks;

  friend bool operator==(const ChunkSequence&, const ChunkSequence&) = default;
};

/// One user's interactions sorted by (ts, item_id).
struct UserHistory {
  std::string user_id;
  std::vector<Interaction> items;

  friend bool operator==(const UserHistory&, const UserHistory&) = default;
};

enum class LabelKind { threshold_above, exact_equal };

/// Maps a raw rating to a binary label: `rating > value` or `rating == value`.
struct LabelPolicy {
  LabelKind kind = LabelKind::threshold_above;
  double value = 3.0;

  int apply(double rating) const;

  /// Parses "threshold_above:3" / "exact_equal:5".
  static LabelPolicy parse(const std::string& text);
  std::string to_string() const;

  static LabelPolicy movielens() { return {LabelKind::threshold_above, 3.0}; }
  static LabelPolicy amazon() { return {LabelKind::exact_equal, 5.0}; }
};

// ---- record (de)serialisation -------------------------------------------

nlohmann::json to_json(const Interaction& x);
/// Parses a raw interaction record. Throws ParseError tagged with `line`.
Interaction interaction_from_json(const nlohmann::json& j, std::size_t line, const LabelPolicy& policy);
/// Parses a record previously written by to_json (label already present).
Interaction labelled_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BehaviorChunk& c);
BehaviorChunk chunk_from_json(const nlohmann::json& j);

// ---- operations ---------------------------------------------------------

/// Orders interactions by (ts, item_id).
void sort_history(std::vector<Interaction>& items);

/// Groups interactions by user (users in lexicographic order) and sorts each
/// history.
std::vector<UserHistory> group_by_user(std::vector<Interaction> all);

/// Reads a JSONL interaction stream and labels it with `policy`.
/// An empty file yields an empty result.
std::vector<UserHistory> ingest(const std::filesystem::path& path, const LabelPolicy& policy);
std::vector<UserHistory> ingest(std::istream& in, const LabelPolicy& policy);

/// Drops users with fewer than `min_interactions` events.
std::vector<UserHistory> filter_min_interactions(std::vector<UserHistory> users, std::size_t min_interactions);

/// Consecutive windows of L items; the last chunk keeps the remainder.
ChunkSequence chunk_history(const std::string& user_id, std::span<const Interaction> history, std::size_t chunk_len);

struct TimeSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

/// Global split at the `ratio` quantile of (ts, user_id, item_id) order.
TimeSplit time_split(std::vector<Interaction> all, double ratio);

}  // namespace hitlbm::behavior
