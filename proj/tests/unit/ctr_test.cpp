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

#include "checks.hpp"
#include "hitlbm/ctr.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/error.hpp"
#include "hitlbm/metrics.hpp"
#include "hitlbm/synth.hpp"
#include "hitlbm/vocab.hpp"

using namespace hitlbm;
using namespace hitlbm::ctr;

namespace {

CtrSample sample(std::string user, std::string item, int label, std::vector<std::string> recent = {}) {
  CtrSample s;
  s.user_id = std::move(user);
  s.item_id = std::move(item);
  s.label = label;
  s.recent_item_ids = std::move(recent);
  return s;
}

std::vector<CtrSample> toy_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CtrSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t u = rng.index(10), it = rng.index(20);
    out.push_back(sample("u" + std::to_string(u), "i" + std::to_string(it), static_cast<int>((u + it) % 2),
                         {"i" + std::to_string(rng.index(20))}));
  }
  return out;
}

/// Synthetic interactions with side vectors naming the item's category and
/// the user's true category at that moment.
std::vector<CtrSample> planted_samples() {
  synth::SynthConfig cfg;
  cfg.n_users = 40;
  cfg.n_items = 100;
  cfg.chunks_per_user = 4;
  cfg.chunk_len = 20;
  cfg.drift.switch_chunk = 3;
  const auto ds = synth::generate_dataset(cfg);
  encoder::HashEncoder enc(16, 1);
  auto split = build_samples(ds.interactions, {}, 10);
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto& x = ds.interactions[i];
    auto& s = split.train[i];
    REQUIRE(s.item_id == x.item_id);
    const std::size_t u = std::stoul(x.user_id.substr(1));
    const std::size_t chunk = (i / cfg.chunk_len) % cfg.chunks_per_user;
    const auto& dist = ds.traces[u].per_chunk_dist[chunk];
    const auto mode = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    s.e_user = enc.encode(vocab::category_token(mode));
    s.e_item = enc.encode(x.attrs.at("category"));
  }
  return split.train;
}

}  // namespace

TEST_CASE("feature layout lengths") {
  CtrConfig cfg;
  cfg.use_e_user = cfg.use_e_item = true;
  CHECK(cfg.input_dim() == 176);
  cfg.use_e_user = cfg.use_e_item = false;
  CHECK(cfg.input_dim() == 48);
}

TEST_CASE("assemble_features concatenates the slots") {
  const auto train = toy_samples(40, 1);
  CtrConfig cfg;
  cfg.d_id = 4;
  cfg.side_dim = 3;
  cfg.use_e_user = true;
  cfg.use_e_item = true;
  CtrModel model(cfg, train);
  Rng rng(2);
  model.init(rng);
  auto s = sample("u1", "i2", 1, {});
  s.e_user = nn::Vector{1, 2, 3};
  s.e_item = nn::Vector{4, 5, 6};
  const auto f = model.assemble_features(s);
  REQUIRE(f.size() == 18);
  for (std::size_t c = 4; c < 8; ++c) CHECK(f[c] == 0.0);  // empty recent list
  CHECK(std::vector<double>(f.begin() + 12, f.end()) == std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto& emb = model.params().value("ctr/item_emb");
  auto unknown = s;
  unknown.item_id = "never-seen";
  const auto g = model.assemble_features(unknown);
  for (std::size_t c = 8; c < 12; ++c) CHECK(g[c] == 0.0);
  CHECK(emb.cols() == 4);

  auto missing = s;
  missing.e_item.reset();
  CHECK_THROWS_AS(model.assemble_features(missing), PreconditionError);
  auto wrong = s;
  wrong.e_user = nn::Vector{1, 2};
  CHECK_THROWS_AS(model.assemble_features(wrong), DimensionError);
}

TEST_CASE("side vectors have no influence when the flags are off") {
  auto train = toy_samples(60, 3);
  CtrModel model(CtrConfig{}, train);
  Rng rng(4);
  model.init(rng);
  auto a = train;
  auto b = train;
  for (auto& s : b) {
    s.e_user = nn::Vector(64, 3.0);
    s.e_item = nn::Vector(64, -2.0);
  }
  CHECK(model.predict(a) == model.predict(b));
}

TEST_CASE("ctr gradients pass a finite-difference check") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    CHECK(hitlbm::testing::composite_check(seed) < 1e-4);
  }
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto train = toy_samples(300, 5);
  CtrHyper hyper;
  hyper.lr = 1e-2;
  hyper.epochs = 5;
  hyper.batch = 32;
  CtrTrainReport report;
  const auto a = train_ctr(train, CtrConfig{}, hyper, &report);
  CHECK(report.final_loss < report.epoch_loss.front());
  const auto b = train_ctr(train, CtrConfig{}, hyper);
  CHECK(a.to_json() == b.to_json());
  const auto restored = CtrModel::from_json(a.to_json());
  CHECK(restored.predict(train) == a.predict(train));
}

TEST_CASE("zero learning rate leaves parameters at their initial values") {
  const auto train = toy_samples(100, 6);
  CtrHyper hyper;
  hyper.lr = 0.0;
  hyper.epochs = 2;
  CtrHyper none = hyper;
  none.epochs = 0;
  CHECK(train_ctr(train, CtrConfig{}, hyper).to_json() == train_ctr(train, CtrConfig{}, none).to_json());
}

TEST_CASE("single-class training data is rejected") {
  auto train = toy_samples(20, 7);
  for (auto& s : train) s.label = 1;
  CHECK_THROWS_AS(train_ctr(train, CtrConfig{}, CtrHyper{}), TrainingError);
}

TEST_CASE("planted side information is learnable") {
  const auto train = planted_samples();
  CtrConfig cfg;
  cfg.side_dim = 16;
  cfg.use_e_user = true;
  cfg.use_e_item = true;
  CtrHyper hyper;
  hyper.lr = 5e-3;
  hyper.epochs = 10;
  hyper.batch = 64;
  const auto model = train_ctr(train, cfg, hyper);
  const auto m = evaluate(model, train);
  REQUIRE(m.auc);
  CHECK(*m.auc > 0.8);
}

TEST_CASE("evaluate examples") {
  const auto train = toy_samples(50, 8);
  CtrConfig cfg;
  CtrModel model(cfg, train);
  Rng rng(1);
  model.init(rng);
  // Zero output layer: every prediction is exactly 0.5.
  const std::string last = "ctr/mlp/w" + std::to_string(cfg.hidden.size());
  model.params().value(last).fill(0.0);
  model.params().value("ctr/mlp/b" + std::to_string(cfg.hidden.size())).fill(0.0);
  const auto m = evaluate(model, train);
  CHECK(m.logloss == doctest::Approx(std::log(2.0)));
  CHECK(m.n == 50);

  auto single = train;
  for (auto& s : single) s.label = 0;
  const auto one = evaluate(model, single);
  CHECK(!one.auc);
  CHECK(one.logloss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("AUC of random scores on balanced labels is near one half") {
  Rng rng(10);
  std::vector<double> s(10000), y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = static_cast<double>(i % 2);
  }
  CHECK(std::abs(metrics::auc(s, y) - 0.5) <= 0.02);
  std::vector<double> perfect{0.1, 0.9, 0.2, 0.8};
  CHECK(metrics::auc(perfect, std::vector<double>{0, 1, 0, 1}) == 1.0);
}

TEST_CASE("build_samples takes the previous window across splits") {
  std::vector<behavior::Interaction> train, test;
  for (int i = 0; i < 5; ++i) {
    train.push_back(hitlbm::testing::make_item("u", "i" + std::to_string(i), "T", 1, i % 2, i));
  }
  test.push_back(hitlbm::testing::make_item("u", "i9", "T", 1, 1, 10));
  const auto split = build_samples(train, test, 3);
  REQUIRE(split.train.size() == 5);
  REQUIRE(split.test.size() == 1);
  CHECK(split.train[0].recent_item_ids.empty());
  CHECK(split.train[4].recent_item_ids == std::vector<std::string>{"i1", "i2", "i3"});
  CHECK(split.test[0].recent_item_ids == std::vector<std::string>{"i2", "i3", "i4"});
  bool is_test = false;
  const auto back = ctr_sample_from_json(to_json(split.test[0], true), &is_test);
  CHECK(is_test);
  CHECK(back.recent_item_ids == split.test[0].recent_item_ids);
}

TEST_CASE("attach_side_info fills every sample") {
  auto fx = hitlbm::testing::make_joint_fixture(3);
  auto samples = fx.samples;
  samples.push_back(sample("stranger", "i0", 1));
  attach_side_info(samples, fx.joint.fusion, fx.joint.ctr.params(), fx.side);
  for (const auto& s : samples) {
    REQUIRE(s.e_user);
    REQUIRE(s.e_item);
  }
  for (double x : *samples.back().e_user) CHECK(x == 0.0);
}

TEST_CASE("ablation ladder rows and report") {
  CHECK(ablation_rungs(false).size() == 4);
  CHECK(ablation_rungs(false)[0].name == "base");
  CHECK(ablation_rungs(false)[3].name == "+CUBE+TIF+HTS");
  CHECK(ablation_rungs(true).size() == 7);

  AblationInputs in;
  in.train = toy_samples(200, 11);
  in.test = toy_samples(80, 12);
  AblationOptions opts;
  opts.seeds = {1, 2};
  opts.hyper.epochs = 1;
  const auto rows = run_ablation(in, opts);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].metrics.has_value());
  CHECK(!rows[2].metrics.has_value());  // no cascade interests supplied
  CHECK(!rows[2].skip_reason.empty());
  const auto report = ablation_report(rows);
  REQUIRE(report.at("rows").size() == 8);
  const auto& first = report.at("rows")[0];
  for (const char* k : {"name", "auc", "logloss", "seed"}) CHECK(first.contains(k));
  CHECK(report.at("rows")[2].at("skipped") == true);
  CHECK(ablation_report(run_ablation(in, opts)).dump() == report.dump());
}
