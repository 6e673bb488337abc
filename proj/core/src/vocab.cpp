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

#include "hitlbm/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace hitlbm::vocab {

namespace {
constexpr std::string_view kPrefix = "cat_";

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }
}  // namespace

std::string category_token(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cat_%02zu", index);
  return buf;
}

std::optional<std::size_t> category_index(std::string_view token) {
  if (token.size() <= kPrefix.size() || token.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  std::size_t v = 0;
  for (char c : token.substr(kPrefix.size())) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

std::vector<std::string> extract_category_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    const std::string_view word = text.substr(i, j - i);
    if (category_index(word) && std::find(out.begin(), out.end(), word) == out.end()) out.emplace_back(word);
    i = j;
  }
  return out;
}

}  // namespace hitlbm::vocab
