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

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "hitlbm/error.hpp"
#include "hitlbm/llm/backend.hpp"
#include "hitlbm/rng.hpp"
#include "hitlbm/vocab.hpp"

namespace hitlbm::llm {

void GenRequest::validate() const {
  if (n == 0) throw PreconditionError("generation request needs n >= 1");
  if (rendered.empty()) throw PreconditionError("generation request has an empty prompt");
  if (temperature < 0.0) throw PreconditionError("generation temperature must be >= 0");
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) s += ", ";
    s += tokens[i];
  }
  return s;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string interest_answer(std::string_view rendered, std::size_t max_tokens) {
  const auto behaviors = prompt_section(rendered, section::kBehaviors);
  if (!behaviors) throw ProtocolError("mock: interest prompt has no behavior section");

  std::vector<std::string> order;
  std::vector<std::size_t> counts;
  std::size_t pos = 0;
  while (pos < behaviors->size()) {
    auto eol = behaviors->find('\n', pos);
    if (eol == std::string_view::npos) eol = behaviors->size();
    const auto line = behaviors->substr(pos, eol - pos);
    pos = eol + 1;
    if (!ends_with(line, "| liked")) continue;
    for (const auto& tok : vocab::extract_category_tokens(line)) {
      auto it = std::find(order.begin(), order.end(), tok);
      if (it == order.end()) {
        order.push_back(tok);
        counts.push_back(1);
      } else {
        ++counts[static_cast<std::size_t>(it - order.begin())];
      }
    }
  }
  if (order.empty()) return "No clear interests in this chunk.";

  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (2 * counts[i] >= top) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  if (idx.size() > max_tokens) idx.resize(max_tokens);
  std::vector<std::string> picked;
  for (std::size_t i : idx) picked.push_back(order[i]);

  std::string text = "Current interests: " + join(picked) + ".";
  if (const auto prev = prompt_section(rendered, section::kPrevSummary)) {
    const auto before = vocab::extract_category_tokens(*prev);
    std::vector<std::string> fresh;
    for (const auto& t : picked) {
      if (std::find(before.begin(), before.end(), t) == before.end()) fresh.push_back(t);
    }
    text += fresh.empty() ? " Interests unchanged from before." : " Emerging interests: " + join(fresh) + ".";
  }
  return text;
}

std::string item_answer(std::string_view rendered) {
  const auto body = prompt_section(rendered, section::kItem);
  if (!body) throw ProtocolError("mock: item prompt has no item section");
  auto line = body->substr(0, body->find('\n'));
  const auto title = line.substr(0, line.find(" |"));
  const auto tokens = vocab::extract_category_tokens(line);
  if (tokens.empty()) return std::string(title) + " is an item.";
  return std::string(title) + " is a " + join(tokens) + " item.";
}

double probe_probability(const std::string& prompt) {
  const auto kind = prompt_kind_of(prompt);
  std::string_view evidence_header;
  if (kind == PromptKind::seq) {
    evidence_header = section::kPrevInterests;
  } else if (kind == PromptKind::point) {
    evidence_header = section::kCurrentInterest;
  } else if (kind == PromptKind::hist) {
    evidence_header = section::kBehaviors;
  } else {
    throw PreconditionError("yes_probability needs a seq, point or hist prompt");
  }
  const auto evidence = prompt_section(prompt, evidence_header);
  const auto target = prompt_section(prompt, section::kTargetItem);
  if (!evidence || !target) throw ProtocolError("mock: probe prompt is missing a section");

  const auto have = vocab::extract_category_tokens(*evidence);
  const auto want = vocab::extract_category_tokens(*target);
  double overlap = 0.0;
  if (!want.empty()) {
    std::size_t hits = 0;
    for (const auto& t : want) hits += std::find(have.begin(), have.end(), t) != have.end() ? 1 : 0;
    overlap = static_cast<double>(hits) / static_cast<double>(want.size());
  }
  return std::clamp(0.1 + 0.8 * overlap, 0.0, 1.0);
}

}  // namespace

std::string MockBackend::id() const {
  return "mock(n_categories=" + std::to_string(policy_.n_categories) +
         ",p_corrupt=" + nlohmann::json(policy_.p_corrupt).dump() +
         ",max_tokens=" + std::to_string(policy_.max_interest_tokens) + ")";
}

std::string MockBackend::faithful_text(const std::string& rendered) const {
  const auto kind = prompt_kind_of(rendered);
  if (!kind) throw ProtocolError("mock: prompt does not start with a task header");
  switch (*kind) {
    case PromptKind::interest:
      return interest_answer(rendered, policy_.max_interest_tokens);
    case PromptKind::item:
      return item_answer(rendered);
    default:
      return probe_probability(rendered) >= 0.5 ? "Yes" : "No";
  }
}

std::string MockBackend::corrupt(const std::string& text, std::uint64_t stream) const {
  Rng rng(stream);
  std::string out;
  std::size_t i = 0;
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };
  while (i < text.size()) {
    if (!word_char(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    const std::string word = text.substr(i, j - i);
    const auto cat = vocab::category_index(word);
    if (cat && policy_.n_categories >= 2 && rng.bernoulli(policy_.p_corrupt)) {
      std::size_t pick = rng.index(policy_.n_categories - 1);
      if (*cat < policy_.n_categories && pick >= *cat) ++pick;
      out += vocab::category_token(pick);
    } else {
      out += word;
    }
    i = j;
  }
  return out;
}

std::vector<std::string> MockBackend::generate(const GenRequest& req) {
  req.validate();
  const std::string faithful = faithful_text(req.rendered);
  const std::uint64_t base = mix_seed(fnv1a64(req.rendered), req.seed);
  std::vector<std::string> out;
  out.reserve(req.n);
  out.push_back(faithful);
  for (std::size_t k = 1; k < req.n; ++k) out.push_back(corrupt(faithful, mix_seed(base, k)));
  return out;
}

double MockBackend::yes_probability(const std::string& prompt) { return probe_probability(prompt); }

}  // namespace hitlbm::llm
