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

#include "hitlbm/llm/prompts.hpp"

#include <nlohmann/json.hpp>

#include "hitlbm/error.hpp"

namespace hitlbm::llm {

namespace {

constexpr std::string_view kTaskPrefix = "### task: ";
constexpr std::string_view kInstruction = "[Instruction]";

void require(bool ok, PromptKind kind, const char* field) {
  if (!ok) {
    throw PreconditionError("render_prompt(" + std::string(to_string(kind)) + "): missing required context field '" +
                            field + "'");
  }
}

void header(std::string& out, PromptKind kind) {
  out += kTaskPrefix;
  out += to_string(kind);
  out += '\n';
}

void open_section(std::string& out, std::string_view name) {
  out += name;
  out += '\n';
}

void behavior_lines(std::string& out, const behavior::BehaviorChunk& chunk) {
  std::size_t n = 1;
  for (const auto& x : chunk.items) {
    out += std::to_string(n++);
    out += ". ";
    out += describe_item(x);
    out += " | rating=";
    out += nlohmann::json(x.rating).dump();
    out += x.label == 1 ? " | liked\n" : " | disliked\n";
  }
}

void yes_no_tail(std::string& out, std::string_view basis) {
  open_section(out, kInstruction);
  out += "Based on ";
  out += basis;
  out += ", predict whether the user will like the target item. Answer with Yes or No.\n";
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::interest:
      return "interest";
    case PromptKind::item:
      return "item";
    case PromptKind::seq:
      return "seq";
    case PromptKind::point:
      return "point";
    case PromptKind::hist:
      return "hist";
  }
  return "?";
}

PromptKind parse_prompt_kind(std::string_view text) {
  for (PromptKind k : {PromptKind::interest, PromptKind::item, PromptKind::seq, PromptKind::point, PromptKind::hist}) {
    if (to_string(k) == text) return k;
  }
  throw PreconditionError("unknown prompt kind '" + std::string(text) + "'");
}

std::string describe_item(const behavior::Interaction& item) {
  std::string s = item.title;
  for (const auto& [k, v] : item.attrs) {
    s += " | ";
    s += k;
    s += '=';
    s += v;
  }
  return s;
}

std::string render_prompt(PromptKind kind, const PromptContext& ctx, const PromptOptions& opts) {
  std::string out;
  header(out, kind);
  switch (kind) {
    case PromptKind::interest: {
      require(ctx.chunk != nullptr, kind, "chunk");
      out += "You are given one chunk of a user's interaction history, ordered from oldest to newest.\n";
      const bool cascaded = !ctx.prev_interests.empty();
      if (cascaded) {
        open_section(out, section::kPrevSummary);
        out += ctx.prev_interests.back();
        out += '\n';
      }
      open_section(out, section::kBehaviors);
      behavior_lines(out, *ctx.chunk);
      open_section(out, kInstruction);
      out += "Summarize the user's current interests from these behaviors.";
      if (cascaded) {
        out += " Compare them with the previous interest summary and emphasize interests that are new or have"
               " shifted instead of repeating earlier ones.";
      }
      out += " Answer with a short interest summary.\n";
      break;
    }
    case PromptKind::item: {
      require(ctx.item != nullptr, kind, "item");
      open_section(out, section::kItem);
      out += describe_item(*ctx.item);
      out += '\n';
      open_section(out, kInstruction);
      out += "Describe the key characteristics of this item and what kind of user would enjoy it.\n";
      break;
    }
    case PromptKind::seq: {
      require(ctx.item != nullptr, kind, "item");
      open_section(out, section::kPrevInterests);
      const std::size_t k = opts.max_prev_interests;
      const std::size_t n = ctx.prev_interests.size();
      const std::size_t first = n > k ? n - k : 0;
      if (first == n) out += "(none)\n";
      for (std::size_t i = first; i < n; ++i) {
        out += std::to_string(i - first + 1);
        out += ". ";
        out += ctx.prev_interests[i];
        out += '\n';
      }
      open_section(out, section::kTargetItem);
      out += describe_item(*ctx.item);
      out += '\n';
      yes_no_tail(out, "the user's previous interests");
      break;
    }
    case PromptKind::point: {
      require(ctx.current_interest.has_value(), kind, "current_interest");
      require(ctx.item != nullptr, kind, "item");
      open_section(out, section::kCurrentInterest);
      out += *ctx.current_interest;
      out += '\n';
      open_section(out, section::kTargetItem);
      out += describe_item(*ctx.item);
      out += '\n';
      yes_no_tail(out, "the user's current interest");
      break;
    }
    case PromptKind::hist: {
      require(ctx.chunk != nullptr, kind, "chunk");
      require(ctx.item != nullptr, kind, "item");
      open_section(out, section::kBehaviors);
      behavior_lines(out, *ctx.chunk);
      open_section(out, section::kTargetItem);
      out += describe_item(*ctx.item);
      out += '\n';
      yes_no_tail(out, "the user's behaviors in this chunk");
      break;
    }
  }
  if (out.size() > opts.max_chars) {
    throw PreconditionError("rendered " + std::string(to_string(kind)) + " prompt has " + std::to_string(out.size()) +
                            " characters, over the budget of " + std::to_string(opts.max_chars));
  }
  return out;
}

std::optional<PromptKind> prompt_kind_of(std::string_view rendered) {
  if (rendered.substr(0, kTaskPrefix.size()) != kTaskPrefix) return std::nullopt;
  const auto eol = rendered.find('\n');
  const auto name = rendered.substr(kTaskPrefix.size(), eol == std::string_view::npos ? std::string_view::npos
                                                                                      : eol - kTaskPrefix.size());
  try {
    return parse_prompt_kind(name);
  } catch (const PreconditionError&) {
    return std::nullopt;
  }
}

std::optional<std::string_view> prompt_section(std::string_view rendered, std::string_view header_text) {
  std::size_t pos = 0;
  while (pos < rendered.size()) {
    const auto eol = rendered.find('\n', pos);
    const auto line = rendered.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    if (line == header_text) {
      const std::size_t body = eol == std::string_view::npos ? rendered.size() : eol + 1;
      std::size_t end = body;
      while (end < rendered.size()) {
        if (rendered[end] == '[' && (end == 0 || rendered[end - 1] == '\n')) break;
        const auto next = rendered.find('\n', end);
        end = next == std::string_view::npos ? rendered.size() : next + 1;
      }
      return rendered.substr(body, end - body);
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return std::nullopt;
}

}  // namespace hitlbm::llm
