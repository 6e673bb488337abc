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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hitlbm/behavior.hpp"

namespace hitlbm::llm {

/// The five prompt templates: interest learning, item knowledge extraction,
/// and the three yes/no probes used to grade an interest (previous interests,
/// current interest, raw chunk behaviors).
enum class PromptKind { interest, item, seq, point, hist };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view text);

struct PromptContext {
  std::vector<std::string> prev_interests;  // oldest first
  std::optional<std::string> current_interest;
  const behavior::BehaviorChunk* chunk = nullptr;
  const behavior::Interaction* item = nullptr;
};

struct PromptOptions {
  std::size_t max_prev_interests = 1;  // K for the seq probe
  std::size_t max_chars = 16000;       // over-budget prompts are rejected, never truncated
};

// Section headers shared by the renderer and the mock backend's parser.
namespace section {
inline constexpr std::string_view kPrevSummary = "[Previous interest summary]";
inline constexpr std::string_view kBehaviors = "[Behaviors in this chunk]";
inline constexpr std::string_view kItem = "[Item]";
inline constexpr std::string_view kPrevInterests = "[Previous interests]";
inline constexpr std::string_view kCurrentInterest = "[Current interest]";
inline constexpr std::string_view kTargetItem = "[Target item]";
}  // namespace section

/// Deterministic rendering. Throws PreconditionError when a field required by
/// `kind` is missing or the result exceeds `opts.max_chars`.
std::string render_prompt(PromptKind kind, const PromptContext& ctx, const PromptOptions& opts = {});

/// "<title> | category=cat_03" style description used inside prompts.
std::string describe_item(const behavior::Interaction& item);

/// The first line of a rendered prompt identifies its kind.
std::optional<PromptKind> prompt_kind_of(std::string_view rendered);

/// Body of a "[Header]" section up to the next header (or end of text).
std::optional<std::string_view> prompt_section(std::string_view rendered, std::string_view header);

}  // namespace hitlbm::llm
