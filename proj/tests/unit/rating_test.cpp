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

#include <cmath>
#include <set>

#include "checks.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/error.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/rating.hpp"

using namespace hitlbm;
using namespace hitlbm::rating;
using hitlbm::testing::make_item;

namespace {

behavior::BehaviorChunk chunk_with(std::size_t pos, std::size_t neg) {
  behavior::BehaviorChunk c{"u", 2, {}};
  std::int64_t ts = 0;
  for (std::size_t i = 0; i < pos; ++i) c.items.push_back(make_item("u", "p" + std::to_string(i), "P", 1, 1, ts++));
  for (std::size_t i = 0; i < neg; ++i) c.items.push_back(make_item("u", "n" + std::to_string(i), "N", 2, 0, ts++));
  return c;
}

std::pair<std::size_t, std::size_t> class_counts(const EvalSet& s) {
  std::size_t p = 0, n = 0;
  for (const auto& x : s.samples) (x.label == 1 ? p : n)++;
  return {p, n};
}

/// Answers each probe with the score written in the target item's title.
class TitleScoreBackend final : public llm::Backend {
 public:
  std::string id() const override { return "title-score"; }
  std::vector<std::string> generate(const llm::GenRequest& req) override {
    return std::vector<std::string>(req.n, "x");
  }
  double yes_probability(const std::string& prompt) override {
    const std::string body(*llm::prompt_section(prompt, llm::section::kTargetItem));
    return std::stod(body.substr(body.find("score ") + 6));
  }
};

EvalSet scored_set(std::vector<double> scores, std::vector<int> labels) {
  EvalSet set;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    set.samples.push_back({make_item("u", "i" + std::to_string(i), "score " + std::to_string(scores[i]), 1,
                                     labels[i], static_cast<std::int64_t>(i)),
                           labels[i]});
  }
  return set;
}

RatingExample example(ExampleKind kind, std::string current, int label, std::vector<std::string> prev = {}) {
  RatingExample ex;
  ex.kind = kind;
  ex.user_id = "u";
  ex.current_text = std::move(current);
  ex.prev_texts = std::move(prev);
  ex.label = label;
  return ex;
}

}  // namespace

TEST_CASE("build_eval_set examples") {
  auto s = build_eval_set(chunk_with(8, 8), 6, 1);
  REQUIRE(s);
  CHECK(class_counts(*s) == std::pair<std::size_t, std::size_t>{6, 6});
  s = build_eval_set(chunk_with(3, 10), 6, 1);
  REQUIRE(s);
  CHECK(class_counts(*s) == std::pair<std::size_t, std::size_t>{3, 3});
  CHECK(!build_eval_set(chunk_with(0, 5), 6, 1));
  CHECK(!build_eval_set(chunk_with(5, 0), 6, 1));
  CHECK_THROWS_AS(build_eval_set(chunk_with(0, 0), 6, 1), PreconditionError);
}

TEST_CASE("build_eval_set samples without replacement, deterministically") {
  const auto c = chunk_with(20, 20);
  const auto a = build_eval_set(c, 6, 9);
  const auto b = build_eval_set(c, 6, 9);
  REQUIRE(a);
  CHECK(a->samples.size() == b->samples.size());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a->samples.size(); ++i) {
    CHECK(a->samples[i].item.item_id == b->samples[i].item.item_id);
    ids.insert(a->samples[i].item.item_id);
  }
  CHECK(ids.size() == 12);
  CHECK(a->chunk_index == 1);
}

TEST_CASE("variant_auc examples") {
  llm::Gateway gw(std::make_shared<TitleScoreBackend>());
  llm::PromptContext ctx;
  ctx.current_interest = "anything";
  auto auc = [&](std::vector<double> s, std::vector<int> y) {
    return variant_auc(llm::PromptKind::point, ctx, scored_set(s, y), gw);
  };
  CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == 1.0);
  const std::vector<double> s{0.9, 0.2, 0.8, 0.3};
  const std::vector<double> y{1, 0, 0, 1};
  CHECK(std::abs(auc(s, {1, 0, 0, 1}) - hitlbm::testing::pairwise_auc(s, y)) <= 1e-12);
  CHECK(auc(s, {1, 0, 0, 1}) == 0.75);
  CHECK(auc({0.5, 0.5}, {1, 0}) == 0.5);
  CHECK_THROWS_AS(auc({0.5, 0.4}, {1, 1}), UndefinedAuc);
  CHECK_THROWS_AS(variant_auc(llm::PromptKind::interest, ctx, scored_set({0.1, 0.2}, {1, 0}), gw), PreconditionError);
}

TEST_CASE("labels use strict comparisons") {
  CHECK(continuity_label({0.7, 0.9, 0.8}) == 1);
  CHECK(effectiveness_label({0.7, 0.9, 0.8}) == 1);
  CHECK(continuity_label({0.7, 0.6, 0.8}) == 0);
  CHECK(effectiveness_label({0.7, 0.6, 0.8}) == 0);
  CHECK(continuity_label({0.7, 0.7, 0.6}) == 0);
  CHECK(effectiveness_label({0.7, 0.7, 0.6}) == 1);
}

TEST_CASE("scripted probabilities drive the rating labels end to end") {
  struct Case {
    double seq, point, hist;
    int cont, eff;
  };
  for (const Case c : {Case{0.7, 0.9, 0.8, 1, 1}, Case{0.7, 0.6, 0.8, 0, 0}, Case{0.7, 0.7, 0.7, 0, 0},
                       Case{0.7, 0.7, 0.6, 0, 1}}) {
    llm::Gateway gw(std::make_shared<hitlbm::testing::ScriptedAucBackend>(c.seq, c.point, c.hist));
    RatingDataOptions opts;
    opts.n_eval = 10;
    const auto data = build_user_rating_data(hitlbm::testing::scripted_cascade_user(), opts, gw);
    REQUIRE(data.cont.size() == 1);
    REQUIRE(data.eff.size() == 1);
    CHECK(data.cont[0].diagnostics.point == doctest::Approx(c.point));
    CHECK(data.cont[0].diagnostics.seq == doctest::Approx(c.seq));
    CHECK(data.cont[0].diagnostics.hist == doctest::Approx(c.hist));
    CHECK(data.cont[0].label == c.cont);
    CHECK(data.eff[0].label == c.eff);
    CHECK(data.cont[0].chunk_index == 1);
    CHECK(data.cont[0].current_text == "likes cat_01");
  }
}

TEST_CASE("chunks without a two-class successor are skipped") {
  auto user = hitlbm::testing::scripted_cascade_user();
  for (auto& x : user.steps[1].chunk.items) x.label = 1;
  llm::Gateway gw(std::make_shared<hitlbm::testing::ScriptedAucBackend>(0.7, 0.9, 0.8));
  const auto data = build_user_rating_data(user, {}, gw);
  CHECK(data.cont.empty());
  CHECK(data.skipped_chunks == 1);
}

TEST_CASE("rating datasets on a cascade from the mock are reproducible across worker counts") {
  Rng rng(4);
  std::vector<CascadeUser> users;
  for (int u = 0; u < 6; ++u) {
    CascadeUser cu{"u" + std::to_string(u), {}};
    auto seq = hitlbm::testing::small_sequence(cu.user_id, 4, rng);
    for (auto& c : seq.chunks) {
      c.items.push_back(make_item(cu.user_id, "xp" + std::to_string(c.index), "XP", 3, 1, 100));
      c.items.push_back(make_item(cu.user_id, "xn" + std::to_string(c.index), "XN", 5, 0, 101));
      cu.steps.push_back({c, "likes cat_0" + std::to_string(c.index)});
    }
    users.push_back(cu);
  }
  llm::Gateway gw(std::make_shared<llm::MockBackend>());
  const auto a = build_rating_datasets(users, {}, gw, 1);
  const auto b = build_rating_datasets(users, {}, gw, 4);
  REQUIRE(a.cont.size() == 18);
  REQUIRE(a.cont.size() == b.cont.size());
  for (std::size_t i = 0; i < a.cont.size(); ++i) CHECK(to_json(a.cont[i]) == to_json(b.cont[i]));
  CHECK(a.cont[1].prev_texts == std::vector<std::string>{"likes cat_01"});
  const auto j = to_json(a.eff[0]);
  CHECK(j.at("kind") == "eff");
  for (const char* k : {"user_id", "chunk_index", "prev_texts", "current_text", "label", "auc_seq", "auc_point",
                        "auc_hist"}) {
    CHECK(j.contains(k));
  }
  CHECK(to_json(rating_example_from_json(j)) == j);
}

TEST_CASE("raters reach near-perfect training AUC on separable data") {
  CHECK(hitlbm::testing::separable_training_auc(RaterKind::srm, 1) >= 0.99);
  CHECK(hitlbm::testing::separable_training_auc(RaterKind::prm, 2) >= 0.99);
}

TEST_CASE("full-batch training loss does not increase") {
  const auto [x, y] = hitlbm::testing::separable_features(60, 6, 3);
  RatingHyper hyper;
  hyper.lr = 1e-3;
  hyper.epochs = 60;
  TrainReport report;
  train_on_features(RaterKind::prm, 6, 1, x, y, hyper, &report);
  REQUIRE(report.epoch_loss.size() == 60);
  for (std::size_t i = 1; i < report.epoch_loss.size(); ++i) CHECK(report.epoch_loss[i] <= report.epoch_loss[i - 1] + 1e-6);
  CHECK(report.final_loss <= report.epoch_loss.back() + 1e-6);
}

TEST_CASE("training is deterministic and rejects single-class data") {
  const auto [x, y] = hitlbm::testing::separable_features(40, 4, 5);
  RatingHyper hyper;
  hyper.epochs = 5;
  const auto a = train_on_features(RaterKind::srm, 4, 1, x, y, hyper);
  const auto b = train_on_features(RaterKind::srm, 4, 1, x, y, hyper);
  CHECK(a.to_json() == b.to_json());
  hyper.batch = 8;
  CHECK(train_on_features(RaterKind::srm, 4, 1, x, y, hyper).to_json() ==
        train_on_features(RaterKind::srm, 4, 1, x, y, hyper).to_json());
  CHECK_THROWS_AS(train_on_features(RaterKind::srm, 4, 1, x, nn::Vector(40, 1.0), hyper), TrainingError);
}

TEST_CASE("rater features and scores") {
  encoder::HashEncoder enc(8, 1);
  RatingModel srm(RaterKind::srm, 8, 1, {4});
  const auto f1 = srm.features({}, "likes cat_01", enc);
  REQUIRE(f1.size() == 9);
  CHECK(f1[8] == 1.0);
  const auto f2 = srm.features({"likes cat_02"}, "likes cat_01", enc);
  CHECK(f2[8] == doctest::Approx(0.75));  // mean of 1/2 and 2/2
  // Only the K most recent previous texts count.
  CHECK(srm.features({"old", "likes cat_02"}, "likes cat_01", enc) == f2);

  const std::vector<RatingExample> data{example(ExampleKind::eff, "likes cat_01", 1),
                                        example(ExampleKind::eff, "likes cat_02", 0)};
  RatingHyper hyper;
  hyper.epochs = 3;
  const auto prm = train_rating_model(RaterKind::prm, data, enc, 1, hyper);
  const double s = prm.score({}, "likes cat_01", enc);
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
  CHECK(prm.score({"a", "b"}, "likes cat_01", enc) == s);
  CHECK(prm.score({}, "likes cat_01", enc) == s);

  const auto restored = RatingModel::from_json(prm.to_json());
  CHECK(restored.score({}, "likes cat_01", enc) == s);
  CHECK(prm.to_json().at("config").at("kind") == "PRM");
  CHECK_THROWS_AS(prm.score({}, "likes cat_01", encoder::HashEncoder(4, 1)), DimensionError);
}

TEST_CASE("perfect predictions give a near-zero loss") {
  CHECK(nn::bce_loss(std::vector<double>{1.0, 0.0, 1.0}, std::vector<double>{1.0, 0.0, 1.0}).loss <= 1e-6);
}
