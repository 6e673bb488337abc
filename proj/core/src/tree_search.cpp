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

#include "hitlbm/tree_search.hpp"

#include <algorithm>

#include "hitlbm/error.hpp"
#include "hitlbm/llm/prompts.hpp"
#include "hitlbm/rng.hpp"

namespace hitlbm::search {

using nlohmann::json;

namespace {

constexpr std::string_view kRootId = "root";
constexpr std::uint64_t kCascadePickSalt = 0xc45cadeULL;

std::string node_id(std::size_t layer, std::size_t child) {
  return "L" + std::to_string(layer) + "." + std::to_string(child);
}

json optional_score(const std::optional<double>& s) { return s ? json(*s) : json(nullptr); }

std::optional<double> score_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

InterestNode root_node() {
  InterestNode root;
  root.node_id = std::string(kRootId);
  root.selected = true;
  return root;
}

std::vector<std::string> sample_layer(const std::string& user_id, const std::string* prev_text,
                                      const behavior::BehaviorChunk& chunk, const SearchConfig& cfg,
                                      llm::Gateway& gateway) {
  llm::PromptContext ctx;
  if (prev_text) ctx.prev_interests.push_back(*prev_text);
  ctx.chunk = &chunk;
  llm::GenRequest req;
  req.kind = llm::PromptKind::interest;
  req.rendered = llm::render_prompt(llm::PromptKind::interest, ctx);
  req.n = cfg.n_expand;
  req.temperature = cfg.temperature;
  req.seed = layer_seed(cfg, user_id, chunk.index);
  req.max_tokens = cfg.max_tokens;
  try {
    return gateway.sample_candidates(req);
  } catch (const TransportError& e) {
    throw TransportError("user " + user_id + ", layer " + std::to_string(chunk.index) + ": " + e.what(),
                         e.attempts());
  }
}

}  // namespace

const InterestNode& InterestTree::at(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw PreconditionError("interest tree of " + user_id + " has no node '" + id + "'");
  return it->second;
}

void InterestTree::add(InterestNode node) {
  const std::string id = node.node_id;
  if (!nodes.emplace(id, std::move(node)).second) {
    throw PreconditionError("interest tree of " + user_id + " already has node '" + id + "'");
  }
  order.push_back(id);
}

void SearchConfig::validate() const {
  if (n_expand < 1) throw ConfigError("n_expand must be >= 1");
  if (k_prev < 1) throw ConfigError("K must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
}

std::uint64_t layer_seed(const SearchConfig& cfg, const std::string& user_id, std::size_t layer) {
  return mix_seed(mix_seed(cfg.seed, fnv1a64(user_id)), layer);
}

double ModelScorer::continuity(const ScoreQuery& q) const { return srm_.score(*q.prev, *q.text, enc_); }

double ModelScorer::effectiveness(const ScoreQuery& q) const { return prm_.score({}, *q.text, enc_); }

std::vector<InterestNode> expand_node(const InterestNode& parent, const behavior::BehaviorChunk& chunk,
                                      const SearchConfig& cfg, llm::Gateway& gateway) {
  if (parent.layer + 1 != chunk.index) {
    throw PreconditionError("expand_node: parent at layer " + std::to_string(parent.layer) + " cannot expand chunk " +
                            std::to_string(chunk.index));
  }
  const std::string* prev = parent.layer == 0 ? nullptr : &parent.text;
  const auto texts = sample_layer(chunk.user_id, prev, chunk, cfg, gateway);
  std::vector<InterestNode> children;
  children.reserve(texts.size());
  for (std::size_t k = 0; k < texts.size(); ++k) {
    InterestNode child;
    child.node_id = node_id(chunk.index, k);
    child.layer = chunk.index;
    child.child_index = k;
    child.parent_id = parent.node_id;
    child.text = texts[k];
    children.push_back(std::move(child));
  }
  return children;
}

std::size_t rate_and_select(std::vector<InterestNode>& children, const std::vector<std::string>& ancestors,
                            const SearchConfig& cfg, const InterestScorer& scorer) {
  if (children.empty()) throw PreconditionError("rate_and_select: no children");
  const std::size_t first = ancestors.size() > cfg.k_prev ? ancestors.size() - cfg.k_prev : 0;
  const std::vector<std::string> prev(ancestors.begin() + static_cast<std::ptrdiff_t>(first), ancestors.end());

  std::size_t best = 0;
  for (std::size_t i = 0; i < children.size(); ++i) {
    auto& c = children[i];
    const ScoreQuery q{c.layer, c.child_index, &prev, &c.text};
    c.s_e = scorer.effectiveness(q);
    if (prev.empty()) {
      c.s_c.reset();
      c.s_final = *c.s_e;
    } else {
      c.s_c = scorer.continuity(q);
      c.s_final = cfg.alpha * *c.s_c + (1.0 - cfg.alpha) * *c.s_e;
    }
    if (*c.s_final > *children[best].s_final) best = i;
  }
  return best;
}

SearchResult run_search(const behavior::ChunkSequence& user, const SearchConfig& cfg, llm::Gateway& gateway,
                        const InterestScorer& scorer) {
  cfg.validate();
  SearchResult out;
  out.tree.user_id = user.user_id;
  out.tree.add(root_node());
  InterestNode parent = root_node();
  for (const auto& chunk : user.chunks) {
    auto children = expand_node(parent, chunk, cfg, gateway);
    const std::size_t best = rate_and_select(children, out.interests, cfg, scorer);
    children[best].selected = true;
    parent = children[best];
    out.path.push_back(parent.node_id);
    out.interests.push_back(parent.text);
    out.scores.push_back(*parent.s_final);
    for (auto& c : children) out.tree.add(std::move(c));
    out.tree.depth = chunk.index;
  }
  return out;
}

std::vector<std::size_t> greedy_oracle(const std::vector<std::vector<double>>& layer_scores) {
  std::vector<std::size_t> path;
  for (const auto& scores : layer_scores) {
    if (scores.empty()) throw PreconditionError("greedy_oracle: empty layer");
    // max_element returns the first of equal maxima.
    path.push_back(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()));
  }
  return path;
}

std::vector<std::size_t> path_child_indices(const SearchResult& result) {
  std::vector<std::size_t> out;
  for (const auto& id : result.path) out.push_back(result.tree.at(id).child_index);
  return out;
}

std::vector<json> tree_records(const InterestTree& tree) {
  std::vector<json> out;
  for (const auto& id : tree.order) {
    const auto& n = tree.at(id);
    out.push_back(json{{"user_id", tree.user_id},
                       {"layer", n.layer},
                       {"node_id", n.node_id},
                       {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
                       {"child_index", n.child_index},
                       {"text", n.text},
                       {"s_c", optional_score(n.s_c)},
                       {"s_e", optional_score(n.s_e)},
                       {"s_final", optional_score(n.s_final)},
                       {"selected", n.selected}});
  }
  return out;
}

std::vector<InterestTree> trees_from_records(const std::vector<json>& records) {
  std::vector<InterestTree> trees;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const auto user = r.at("user_id").get<std::string>();
    auto [it, fresh] = index.emplace(user, trees.size());
    if (fresh) {
      trees.emplace_back();
      trees.back().user_id = user;
    }
    InterestNode n;
    n.node_id = r.at("node_id").get<std::string>();
    n.layer = r.at("layer").get<std::size_t>();
    n.child_index = r.at("child_index").get<std::size_t>();
    if (!r.at("parent_id").is_null()) n.parent_id = r.at("parent_id").get<std::string>();
    n.text = r.at("text").get<std::string>();
    n.s_c = score_from(r, "s_c");
    n.s_e = score_from(r, "s_e");
    n.s_final = score_from(r, "s_final");
    n.selected = r.at("selected").get<bool>();
    auto& tree = trees[it->second];
    tree.depth = std::max(tree.depth, n.layer);
    tree.add(std::move(n));
  }
  return trees;
}

SearchResult selected_path(const InterestTree& tree) {
  SearchResult out;
  out.tree = tree;
  std::vector<const InterestNode*> by_layer(tree.depth + 1, nullptr);
  for (const auto& [id, n] : tree.nodes) {
    if (!n.selected) continue;
    if (by_layer[n.layer]) {
      throw PreconditionError("interest tree of " + tree.user_id + " selects two nodes at layer " +
                              std::to_string(n.layer));
    }
    by_layer[n.layer] = &n;
  }
  for (std::size_t layer = 1; layer <= tree.depth; ++layer) {
    const InterestNode* n = by_layer[layer];
    if (!n) throw PreconditionError("interest tree of " + tree.user_id + " selects nothing at layer " + std::to_string(layer));
    out.path.push_back(n->node_id);
    out.interests.push_back(n->text);
    out.scores.push_back(n->s_final.value_or(1.0));
  }
  return out;
}

rating::CascadeUser run_cascade(const behavior::ChunkSequence& user, const SearchConfig& cfg, llm::Gateway& gateway) {
  cfg.validate();
  rating::CascadeUser out;
  out.user_id = user.user_id;
  for (const auto& chunk : user.chunks) {
    const std::string* prev = out.steps.empty() ? nullptr : &out.steps.back().interest;
    const auto texts = sample_layer(user.user_id, prev, chunk, cfg, gateway);
    Rng pick(mix_seed(layer_seed(cfg, user.user_id, chunk.index), kCascadePickSalt));
    out.steps.push_back({chunk, texts[pick.index(texts.size())]});
  }
  return out;
}

json to_json(const rating::CascadeUser& user) {
  json steps = json::array();
  for (const auto& s : user.steps) steps.push_back(json{{"chunk", behavior::to_json(s.chunk)}, {"interest", s.interest}});
  return json{{"user_id", user.user_id}, {"steps", steps}};
}

rating::CascadeUser cascade_user_from_json(const json& j) {
  rating::CascadeUser u;
  u.user_id = j.at("user_id").get<std::string>();
  for (const auto& s : j.at("steps")) {
    u.steps.push_back({behavior::chunk_from_json(s.at("chunk")), s.at("interest").get<std::string>()});
  }
  return u;
}

}  // namespace hitlbm::search
