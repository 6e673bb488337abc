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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/behavior.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/rating.hpp"

namespace hitlbm::search {

struct InterestNode {
  std::string node_id;
  std::size_t layer = 0;
  std::size_t child_index = 0;
  std::optional<std::string> parent_id;
  std::string text;
  std::optional<double> s_c;
  std::optional<double> s_e;
  std::optional<double> s_final;
  bool selected = false;
};

/// Every expanded node of one user's search, root included.
struct InterestTree {
  std::string user_id;
  std::map<std::string, InterestNode> nodes;
  std::vector<std::string> order;  // insertion order: root, then layer by layer
  std::size_t depth = 0;

  const InterestNode& at(const std::string& id) const;
  void add(InterestNode node);
};

struct SearchConfig {
  std::size_t n_expand = 10;
  std::size_t k_prev = 1;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::size_t max_tokens = 256;

  void validate() const;
};

/// Seed of the layer-`layer` generation request for `user_id`. The plain
/// cascade pass uses the same seed so its first layer is a cache hit.
std::uint64_t layer_seed(const SearchConfig& cfg, const std::string& user_id, std::size_t layer);

struct ScoreQuery {
  std::size_t layer = 0;
  std::size_t child_index = 0;
  const std::vector<std::string>* prev = nullptr;  // selected ancestors, oldest first, at most K
  const std::string* text = nullptr;
};

/// Continuity and effectiveness scores of a candidate interest.
class InterestScorer {
 public:
  virtual ~InterestScorer() = default;
  virtual double continuity(const ScoreQuery& q) const = 0;
  virtual double effectiveness(const ScoreQuery& q) const = 0;
};

/// Scores with trained SRM / PRM rating models.
class ModelScorer final : public InterestScorer {
 public:
  ModelScorer(const rating::RatingModel& srm, const rating::RatingModel& prm, const encoder::TextEncoder& enc)
      : srm_(srm), prm_(prm), enc_(enc) {}
  double continuity(const ScoreQuery& q) const override;
  double effectiveness(const ScoreQuery& q) const override;

 private:
  const rating::RatingModel& srm_;
  const rating::RatingModel& prm_;
  const encoder::TextEncoder& enc_;
};

/// Layer-`chunk.index` children of `parent`, conditioned on the parent's text.
std::vector<InterestNode> expand_node(const InterestNode& parent, const behavior::BehaviorChunk& chunk,
                                      const SearchConfig& cfg, llm::Gateway& gateway);

/// Scores `children` in place and returns the index of the winner
/// (highest s_final, ties to the lowest child_index).
std::size_t rate_and_select(std::vector<InterestNode>& children, const std::vector<std::string>& ancestors,
                            const SearchConfig& cfg, const InterestScorer& scorer);

struct SearchResult {
  InterestTree tree;
  std::vector<std::string> path;       // selected node ids, layer 1..T
  std::vector<std::string> interests;  // their texts
  std::vector<double> scores;          // their s_final
};

SearchResult run_search(const behavior::ChunkSequence& user, const SearchConfig& cfg, llm::Gateway& gateway,
                        const InterestScorer& scorer);

/// Reference layer-wise argmax over fully materialised per-layer scores.
/// Returns the selected child index of every layer.
std::vector<std::size_t> greedy_oracle(const std::vector<std::vector<double>>& layer_scores);

/// Child index chosen at each layer of a search result.
std::vector<std::size_t> path_child_indices(const SearchResult& result);

std::vector<nlohmann::json> tree_records(const InterestTree& tree);
/// Rebuilds trees from interests.jsonl records (grouped by user, record order kept).
std::vector<InterestTree> trees_from_records(const std::vector<nlohmann::json>& records);
/// Selected texts and scores of a tree, layer 1..T.
SearchResult selected_path(const InterestTree& tree);

/// The plain cascading pass: at each chunk one candidate (picked uniformly
/// with a seeded draw from the same candidate set the search sees) becomes
/// the context of the next chunk.
rating::CascadeUser run_cascade(const behavior::ChunkSequence& user, const SearchConfig& cfg, llm::Gateway& gateway);

nlohmann::json to_json(const rating::CascadeUser& user);
rating::CascadeUser cascade_user_from_json(const nlohmann::json& j);

}  // namespace hitlbm::search
