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

#include "hitlbm/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "hitlbm/error.hpp"

namespace hitlbm::behavior {

using nlohmann::json;

int LabelPolicy::apply(double rating) const {
  switch (kind) {
    case LabelKind::threshold_above:
      return rating > value ? 1 : 0;
    case LabelKind::exact_equal:
      return rating == value ? 1 : 0;
  }
  return 0;
}

LabelPolicy LabelPolicy::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("label policy '" + text + "' must look like kind:value");
  const std::string kind = text.substr(0, colon);
  LabelPolicy p;
  if (kind == "threshold_above") {
    p.kind = LabelKind::threshold_above;
  } else if (kind == "exact_equal") {
    p.kind = LabelKind::exact_equal;
  } else {
    throw ConfigError("unknown label policy kind '" + kind + "'");
  }
  try {
    std::size_t used = 0;
    p.value = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("label policy value in '" + text + "' is not a number");
  }
  return p;
}

std::string LabelPolicy::to_string() const {
  std::string v = nlohmann::json(value).dump();
  return (kind == LabelKind::threshold_above ? "threshold_above:" : "exact_equal:") + v;
}

json to_json(const Interaction& x) {
  return json{{"user_id", x.user_id}, {"item_id", x.item_id}, {"title", x.title}, {"attrs", x.attrs},
              {"rating", x.rating},   {"ts", x.ts},           {"label", x.label}};
}

namespace {

[[noreturn]] void reject(std::size_t line, const std::string& why) {
  throw ParseError("line " + std::to_string(line) + ": " + why, line);
}

std::string id_field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) reject(line, std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  reject(line, std::string("field '") + key + "' must be a string");
}

}  // namespace

Interaction interaction_from_json(const json& j, std::size_t line, const LabelPolicy& policy) {
  if (!j.is_object()) reject(line, "record is not an object");
  Interaction x;
  x.user_id = id_field(j, "user_id", line);
  x.item_id = id_field(j, "item_id", line);
  if (x.user_id.empty() || x.item_id.empty()) reject(line, "empty user_id or item_id");

  auto rating = j.find("rating");
  if (rating == j.end()) reject(line, "missing field 'rating'");
  if (!rating->is_number()) reject(line, "field 'rating' must be a number");
  x.rating = rating->get<double>();
  if (!std::isfinite(x.rating)) reject(line, "rating is not finite");

  auto ts = j.find("ts");
  if (ts == j.end()) reject(line, "missing field 'ts'");
  if (!ts->is_number_integer()) reject(line, "field 'ts' must be an integer");
  x.ts = ts->get<std::int64_t>();
  if (x.ts < 0) reject(line, "negative ts");

  if (auto t = j.find("title"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) reject(line, "field 'title' must be a string");
    x.title = t->get<std::string>();
  }
  if (x.title.empty()) x.title = x.item_id;

  if (auto a = j.find("attrs"); a != j.end() && !a->is_null()) {
    if (!a->is_object()) reject(line, "field 'attrs' must be an object");
    for (const auto& [k, v] : a->items()) {
      x.attrs[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  x.label = policy.apply(x.rating);
  return x;
}

Interaction labelled_from_json(const json& j) {
  Interaction x;
  x.user_id = j.at("user_id").get<std::string>();
  x.item_id = j.at("item_id").get<std::string>();
  x.title = j.at("title").get<std::string>();
  x.attrs = j.at("attrs").get<std::map<std::string, std::string>>();
  x.rating = j.at("rating").get<double>();
  x.ts = j.at("ts").get<std::int64_t>();
  x.label = j.at("label").get<int>();
  return x;
}

json to_json(const BehaviorChunk& c) {
  json items = json::array();
  for (const auto& x : c.items) items.push_back(to_json(x));
  return json{{"user_id", c.user_id}, {"chunk_index", c.index}, {"items", std::move(items)}};
}

BehaviorChunk chunk_from_json(const json& j) {
  BehaviorChunk c;
  c.user_id = j.at("user_id").get<std::string>();
  c.index = j.at("chunk_index").get<std::size_t>();
  for (const auto& x : j.at("items")) c.items.push_back(labelled_from_json(x));
  return c;
}

void sort_history(std::vector<Interaction>& items) {
  std::stable_sort(items.begin(), items.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.ts, a.item_id) < std::tie(b.ts, b.item_id);
  });
}

std::vector<UserHistory> group_by_user(std::vector<Interaction> all) {
  std::map<std::string, std::vector<Interaction>> by_user;
  for (auto& x : all) by_user[x.user_id].push_back(std::move(x));
  std::vector<UserHistory> out;
  out.reserve(by_user.size());
  for (auto& [uid, items] : by_user) {
    sort_history(items);
    out.push_back({uid, std::move(items)});
  }
  return out;
}

std::vector<UserHistory> ingest(std::istream& in, const LabelPolicy& policy) {
  std::vector<Interaction> all;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no, e.byte);
    }
    all.push_back(interaction_from_json(j, line_no, policy));
  }
  return group_by_user(std::move(all));
}

std::vector<UserHistory> ingest(const std::filesystem::path& path, const LabelPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction file " + path.string());
  return ingest(in, policy);
}

std::vector<UserHistory> filter_min_interactions(std::vector<UserHistory> users, std::size_t min_interactions) {
  std::erase_if(users, [&](const UserHistory& u) { return u.items.size() < min_interactions; });
  return users;
}

ChunkSequence chunk_history(const std::string& user_id, std::span<const Interaction> history, std::size_t chunk_len) {
  if (chunk_len == 0) throw PreconditionError("chunk length must be >= 1");
  ChunkSequence seq{user_id, {}};
  for (std::size_t start = 0; start < history.size(); start += chunk_len) {
    const std::size_t end = std::min(history.size(), start + chunk_len);
    BehaviorChunk c;
    c.user_id = user_id;
    c.index = seq.chunks.size() + 1;
    c.items.assign(history.begin() + static_cast<std::ptrdiff_t>(start),
                   history.begin() + static_cast<std::ptrdiff_t>(end));
    seq.chunks.push_back(std::move(c));
  }
  return seq;
}

TimeSplit time_split(std::vector<Interaction> all, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw PreconditionError("split ratio must lie in (0, 1)");
  std::stable_sort(all.begin(), all.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.ts, a.user_id, a.item_id) < std::tie(b.ts, b.user_id, b.item_id);
  });
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(all.size()) + 1e-9));
  TimeSplit s;
  s.train.assign(std::make_move_iterator(all.begin()),
                 std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)));
  s.test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)),
                std::make_move_iterator(all.end()));
  return s;
}

}  // namespace hitlbm::behavior
