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

#include <doctest.h>

#include <mutex>

#include "checks.hpp"
#include "hitlbm/error.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/llm/prompts.hpp"
#include "hitlbm/tree_search.hpp"

using namespace hitlbm;
using namespace hitlbm::search;
using hitlbm::testing::ScriptedScorer;
using hitlbm::testing::small_sequence;

namespace {

/// Mock backend that records every interest prompt it answers.
class RecordingBackend final : public llm::Backend {
 public:
  std::string id() const override { return inner_.id(); }
  std::vector<std::string> generate(const llm::GenRequest& req) override {
    std::lock_guard lock(mu_);
    prompts.push_back(req.rendered);
    return inner_.generate(req);
  }
  double yes_probability(const std::string& p) override { return inner_.yes_probability(p); }
  std::vector<std::string> prompts;

 private:
  llm::MockBackend inner_;
  std::mutex mu_;
};

class FailingBackend final : public llm::Backend {
 public:
  std::string id() const override { return "failing"; }
  std::vector<std::string> generate(const llm::GenRequest&) override { throw TransportError("connection refused", 3); }
  double yes_probability(const std::string&) override { throw TransportError("connection refused", 3); }
};

SearchConfig config(std::size_t n, double alpha = 0.5) {
  SearchConfig c;
  c.n_expand = n;
  c.alpha = alpha;
  c.seed = 3;
  return c;
}

std::vector<InterestNode> plain_children(std::size_t n) {
  std::vector<InterestNode> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k].node_id = "L2." + std::to_string(k);
    out[k].layer = 2;
    out[k].child_index = k;
    out[k].text = "t" + std::to_string(k);
  }
  return out;
}

}  // namespace

TEST_CASE("expand_node creates n children from the parent's context") {
  auto backend = std::make_shared<RecordingBackend>();
  llm::Gateway gw(backend);
  Rng rng(1);
  const auto user = small_sequence("u", 2, rng);
  InterestNode root;
  root.node_id = "root";
  const auto children = expand_node(root, user.chunks[0], config(10), gw);
  REQUIRE(children.size() == 10);
  CHECK(children[3].node_id == "L1.3");
  CHECK(children[3].child_index == 3);
  CHECK(children[3].parent_id == "root");
  CHECK(backend->prompts.back().find(llm::section::kPrevSummary) == std::string::npos);
  CHECK(expand_node(root, user.chunks[0], config(10), gw)[5].text == children[5].text);
  CHECK_THROWS_AS(expand_node(root, user.chunks[1], config(10), gw), PreconditionError);
}

TEST_CASE("transport errors carry user and layer") {
  llm::Gateway gw(std::make_shared<FailingBackend>());
  Rng rng(1);
  const auto user = small_sequence("user42", 1, rng);
  InterestNode root;
  root.node_id = "root";
  try {
    expand_node(root, user.chunks[0], config(2), gw);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("user42") != std::string::npos);
    CHECK(msg.find("layer 1") != std::string::npos);
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("rate_and_select examples") {
  SUBCASE("fused score") {
    auto children = plain_children(1);
    const ScriptedScorer scorer({{}, {0.8}}, {{}, {0.6}});
    rate_and_select(children, {"prev"}, config(1), scorer);
    CHECK(*children[0].s_final == doctest::Approx(0.7));
    CHECK(*children[0].s_c == 0.8);
    CHECK(*children[0].s_e == 0.6);
  }
  SUBCASE("ties go to the lowest child index") {
    auto children = plain_children(3);
    const ScriptedScorer scorer({{}, {0.2, 0.5, 0.5}}, {{}, {0.4, 0.5, 0.5}});
    CHECK(rate_and_select(children, {"prev"}, config(3), scorer) == 1);
  }
  SUBCASE("alpha 1 ignores effectiveness") {
    auto children = plain_children(3);
    const ScriptedScorer scorer({{}, {0.1, 0.9, 0.3}}, {{}, {1.0, 0.0, 1.0}});
    CHECK(rate_and_select(children, {"prev"}, config(3, 1.0), scorer) == 1);
  }
  SUBCASE("layer 1 uses effectiveness only") {
    auto children = plain_children(2);
    for (auto& c : children) c.layer = 1;
    const ScriptedScorer scorer({{0.9, 0.0}}, {{0.2, 0.3}});
    CHECK(rate_and_select(children, {}, config(2), scorer) == 1);
    CHECK(!children[0].s_c.has_value());
    CHECK(*children[0].s_final == 0.2);
  }
  SUBCASE("empty children") {
    std::vector<InterestNode> none;
    CHECK_THROWS_AS(rate_and_select(none, {}, config(1), ScriptedScorer({}, {})), PreconditionError);
  }
}

TEST_CASE("scripted two-layer search follows the layer-wise argmax") {
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  Rng rng(2);
  const auto user = small_sequence("u", 2, rng);
  // alpha = 0: s_final = s_e at every layer.
  const ScriptedScorer scorer({{0, 0}, {0, 0}}, {{0.9, 0.1}, {0.2, 0.8}});
  const auto result = run_search(user, config(2, 0.0), gw, scorer);
  CHECK(path_child_indices(result) == std::vector<std::size_t>{0, 1});
  CHECK(result.path == std::vector<std::string>{"L1.0", "L2.1"});
  CHECK(result.scores == std::vector<double>{0.9, 0.8});
}

TEST_CASE("search over zero chunks is empty") {
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  const auto result = run_search({"u", {}}, config(3), gw, ScriptedScorer({}, {}));
  CHECK(result.path.empty());
  CHECK(result.interests.empty());
}

TEST_CASE("greedy_oracle examples") {
  CHECK(greedy_oracle({{0.3, 0.3, 0.2}}) == std::vector<std::size_t>{0});
  CHECK(greedy_oracle({{0.1, 0.4}, {0.5, 0.6, 0.6}}) == std::vector<std::size_t>{1, 1});
  std::vector<std::vector<double>> scores{{0.1, 0.7, 0.3}, {0.4, 0.2}};
  auto transformed = scores;
  for (auto& layer : transformed) {
    for (double& s : layer) s = std::exp(3.0 * s) - 5.0;
  }
  CHECK(greedy_oracle(transformed) == greedy_oracle(scores));
  CHECK_THROWS_AS(greedy_oracle({{}}), PreconditionError);
}

TEST_CASE("run_search agrees with the oracle on scripted trees") {
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    CHECK(hitlbm::testing::scripted_search_agrees(seed, gw));
  }
}

TEST_CASE("search trees are complete, valid and conditioned on the selected path") {
  auto backend = std::make_shared<RecordingBackend>();
  llm::Gateway gw(backend);
  Rng rng(5);
  const auto user = small_sequence("u9", 4, rng);
  Rng srng(6);
  std::vector<std::vector<double>> eff(4, std::vector<double>(5));
  for (auto& l : eff) {
    for (double& s : l) s = srng.uniform();
  }
  const ScriptedScorer scorer(std::vector<std::vector<double>>(4, std::vector<double>(5, 0.5)), eff);
  const auto result = run_search(user, config(5), gw, scorer);

  CHECK(result.tree.nodes.size() == 1 + 4 * 5);
  CHECK(result.tree.depth == 4);
  CHECK(result.tree.at("root").selected);
  std::string parent = "root";
  for (std::size_t l = 1; l <= 4; ++l) {
    std::size_t selected = 0;
    for (const auto& [id, n] : result.tree.nodes) {
      if (n.layer == l && n.selected) ++selected;
    }
    CHECK(selected == 1);
    const auto& node = result.tree.at(result.path[l - 1]);
    CHECK(node.parent_id == parent);
    CHECK(node.layer == l);
    parent = node.node_id;
  }
  // Each layer's prompt embeds the previously selected text, never a sibling.
  REQUIRE(backend->prompts.size() == 4);
  for (std::size_t l = 2; l <= 4; ++l) {
    const auto& prompt = backend->prompts[l - 1];
    const auto summary = llm::prompt_section(prompt, llm::section::kPrevSummary);
    REQUIRE(summary);
    CHECK(summary->find(result.interests[l - 2]) != std::string_view::npos);
  }

  const auto again = run_search(user, config(5), gw, scorer);
  CHECK(tree_records(again.tree) == tree_records(result.tree));
}

TEST_CASE("tree records round trip and expose the selected path") {
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  Rng rng(7);
  const auto user = small_sequence("u3", 3, rng);
  const ScriptedScorer scorer({{0.1, 0.2, 0.3}, {0.3, 0.2, 0.1}, {0.5, 0.5, 0.9}},
                              {{0.3, 0.9, 0.1}, {0.6, 0.6, 0.7}, {0.1, 0.2, 0.3}});
  const auto result = run_search(user, config(3), gw, scorer);
  const auto records = tree_records(result.tree);
  REQUIRE(records.size() == 10);
  for (const char* k : {"user_id", "layer", "node_id", "parent_id", "child_index", "text", "s_c", "s_e", "s_final",
                        "selected"}) {
    CHECK(records[1].contains(k));
  }
  CHECK(records[0].at("parent_id").is_null());
  CHECK(records[1].at("s_c").is_null());  // layer 1 has no continuity score
  const auto trees = trees_from_records(records);
  REQUIRE(trees.size() == 1);
  const auto path = selected_path(trees[0]);
  CHECK(path.path == result.path);
  CHECK(path.interests == result.interests);
  CHECK(path.scores == result.scores);
}

TEST_CASE("cascade shares the search's first-layer request") {
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  Rng rng(8);
  const auto user = small_sequence("u5", 3, rng);
  const auto cascade = run_cascade(user, config(10), gw);
  REQUIRE(cascade.steps.size() == 3);
  const std::size_t calls = gw.backend_calls();
  const ScriptedScorer scorer(std::vector<std::vector<double>>(3, std::vector<double>(10, 0.0)),
                              std::vector<std::vector<double>>(3, std::vector<double>(10, 0.0)));
  run_search(user, config(10), gw, scorer);
  CHECK(gw.backend_calls() < calls + 3);  // layer 1 came from the cache
  CHECK(cascade.steps[1].chunk.index == 2);
  const auto back = cascade_user_from_json(to_json(cascade));
  CHECK(back.steps.size() == 3);
  CHECK(back.steps[2].interest == cascade.steps[2].interest);
}

TEST_CASE("search config validation") {
  SearchConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_expand = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(layer_seed(config(1), "u", 1) != layer_seed(config(1), "u", 2));
  CHECK(layer_seed(config(1), "u", 1) != layer_seed(config(1), "v", 1));
}
