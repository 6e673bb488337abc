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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "checks.hpp"
#include "hitlbm/behavior.hpp"
#include "hitlbm/error.hpp"

using namespace hitlbm;
using namespace hitlbm::behavior;

namespace {

std::vector<Interaction> history(std::size_t n) {
  std::vector<Interaction> out;
  for (std::size_t i = 0; i < n; ++i) {
    Interaction x;
    x.user_id = "u";
    x.item_id = "i" + std::to_string(i);
    x.title = "t";
    x.ts = static_cast<std::int64_t>(i);
    out.push_back(x);
  }
  return out;
}

std::vector<std::size_t> sizes(const ChunkSequence& seq) {
  std::vector<std::size_t> out;
  for (const auto& c : seq.chunks) out.push_back(c.items.size());
  return out;
}

}  // namespace

TEST_CASE("label policies") {
  const auto ml = LabelPolicy::movielens();
  CHECK(ml.apply(4.0) == 1);
  CHECK(ml.apply(3.0) == 0);
  const auto amazon = LabelPolicy::amazon();
  CHECK(amazon.apply(4.0) == 0);
  CHECK(amazon.apply(5.0) == 1);
  CHECK(LabelPolicy::parse("exact_equal:5").kind == LabelKind::exact_equal);
  CHECK(LabelPolicy::parse(ml.to_string()).value == 3.0);
  CHECK_THROWS(LabelPolicy::parse("above:3"));
  CHECK_THROWS(LabelPolicy::parse("threshold_above:x"));
}

TEST_CASE("chunk_history examples") {
  CHECK(sizes(chunk_history("u", history(120), 50)) == std::vector<std::size_t>{50, 50, 20});
  CHECK(sizes(chunk_history("u", history(50), 50)) == std::vector<std::size_t>{50});
  CHECK(chunk_history("u", history(0), 50).chunks.empty());
  CHECK_THROWS_AS(chunk_history("u", history(3), 0), PreconditionError);
}

TEST_CASE("chunking reassembles the history and numbers chunks from 1") {
  const auto h = history(37);
  for (std::size_t L = 1; L <= 40; ++L) {
    const auto seq = chunk_history("u", h, L);
    CHECK(seq.chunks.size() == (h.size() + L - 1) / L);
    std::vector<Interaction> flat;
    for (std::size_t i = 0; i < seq.chunks.size(); ++i) {
      CHECK(seq.chunks[i].index == i + 1);
      CHECK(seq.chunks[i].items.size() <= L);
      flat.insert(flat.end(), seq.chunks[i].items.begin(), seq.chunks[i].items.end());
    }
    CHECK(flat == h);
  }
}

TEST_CASE("time_split examples") {
  auto h = history(10);
  std::reverse(h.begin(), h.end());
  auto split = time_split(h, 0.9);
  REQUIRE(split.train.size() == 9);
  REQUIRE(split.test.size() == 1);
  CHECK(split.test[0].ts == 9);

  CHECK(time_split(history(4), 0.5).train.size() == 2);

  std::vector<Interaction> same;
  for (const char* u : {"b", "a", "c"}) {
    for (const char* i : {"y", "x", "z"}) {
      Interaction x;
      x.user_id = u;
      x.item_id = i;
      x.ts = 5;
      same.push_back(x);
    }
  }
  const auto s1 = time_split(same, 0.9);
  std::reverse(same.begin(), same.end());
  const auto s2 = time_split(same, 0.9);
  CHECK(s1.train == s2.train);
  CHECK(s1.test == s2.test);
  REQUIRE(s1.test.size() == 1);
  CHECK(s1.test[0].user_id == "c");
  CHECK(s1.test[0].item_id == "z");
}

TEST_CASE("time_split keeps train before test") {
  Rng rng(3);
  std::vector<Interaction> all;
  for (int i = 0; i < 200; ++i) {
    Interaction x;
    x.user_id = "u" + std::to_string(rng.index(7));
    x.item_id = "i" + std::to_string(i);
    x.ts = static_cast<std::int64_t>(rng.index(1000000));
    all.push_back(x);
  }
  const auto split = time_split(all, 0.8);
  std::int64_t max_train = 0, min_test = INT64_MAX;
  for (const auto& x : split.train) max_train = std::max(max_train, x.ts);
  for (const auto& x : split.test) min_test = std::min(min_test, x.ts);
  CHECK(max_train <= min_test);
  CHECK(split.train.size() + split.test.size() == all.size());
}

TEST_CASE("ingest sorts, groups and labels") {
  std::istringstream in(
      R"({"user_id":"u2","item_id":"b","title":"B","attrs":{"category":"cat_01"},"rating":4,"ts":20})"
      "\n\n"
      R"({"user_id":"u1","item_id":"z","title":"Z","rating":3,"ts":10})"
      "\n"
      R"({"user_id":"u2","item_id":"a","title":"A","rating":5,"ts":20})"
      "\n");
  const auto users = ingest(in, LabelPolicy::movielens());
  REQUIRE(users.size() == 2);
  CHECK(users[0].user_id == "u1");
  CHECK(users[0].items[0].label == 0);
  REQUIRE(users[1].items.size() == 2);
  CHECK(users[1].items[0].item_id == "a");  // ts tie broken by item_id
  CHECK(users[1].items[1].attrs.at("category") == "cat_01");
  CHECK(users[1].items[1].label == 1);
}

TEST_CASE("ingest rejects malformed records with their line number") {
  std::istringstream in(
      R"({"user_id":"u","item_id":"a","title":"A","rating":4,"ts":1})"
      "\n"
      R"({"user_id":"u","item_id":"b","title":"B","ts":2})"
      "\n");
  try {
    ingest(in, LabelPolicy::movielens());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream bad_json("{\"user_id\":\n");
  CHECK_THROWS_AS(ingest(bad_json, LabelPolicy::movielens()), ParseError);
  std::istringstream neg_ts(R"({"user_id":"u","item_id":"a","title":"A","rating":4,"ts":-1})");
  CHECK_THROWS_AS(ingest(neg_ts, LabelPolicy::movielens()), ParseError);
}

TEST_CASE("ingest of an empty file is empty and repeated ingest is identical") {
  const auto dir = std::filesystem::temp_directory_path() / "hitlbm_behavior_test";
  std::filesystem::create_directories(dir);
  const auto empty = dir / "empty.jsonl";
  std::ofstream(empty).close();
  CHECK(ingest(empty, LabelPolicy::movielens()).empty());
  const auto some = dir / "some.jsonl";
  std::ofstream(some) << R"({"user_id":"u","item_id":"a","title":"A","rating":4,"ts":1})" << "\n";
  CHECK(ingest(some, LabelPolicy::movielens()) == ingest(some, LabelPolicy::movielens()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("filter_min_interactions drops small users") {
  std::vector<UserHistory> users{{"a", history(3)}, {"b", history(5)}};
  const auto kept = filter_min_interactions(users, 4);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].user_id == "b");
}

TEST_CASE("chunk json round trip") {
  Rng rng(1);
  const auto seq = hitlbm::testing::small_sequence("u7", 2, rng);
  const auto j = to_json(seq.chunks[1]);
  CHECK(j.at("chunk_index") == 2);
  CHECK(chunk_from_json(j) == seq.chunks[1]);
}
