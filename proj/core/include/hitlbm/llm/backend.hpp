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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hitlbm/llm/prompts.hpp"

namespace hitlbm::llm {

struct GenRequest {
  PromptKind kind = PromptKind::interest;
  std::string rendered;
  std::size_t n = 1;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 256;

  /// Throws PreconditionError unless rendered is non-empty and n >= 1.
  void validate() const;
};

/// Text generation and yes-token probability provider.
class Backend {
 public:
  virtual ~Backend() = default;
  /// Stable identifier; part of every cache key.
  virtual std::string id() const = 0;
  /// Exactly req.n texts.
  virtual std::vector<std::string> generate(const GenRequest& req) = 0;
  /// P("Yes") for a rendered seq/point/hist prompt.
  virtual double yes_probability(const std::string& prompt) = 0;
};

/// Knobs of the planted-faithful mock.
struct MockPolicy {
  std::size_t n_categories = 10;  // size of the cat_XX vocabulary used for corruption
  double p_corrupt = 0.8;
  std::size_t max_interest_tokens = 3;
};

/// Deterministic stand-in for an LLM. For interest prompts candidate 0 is
/// faithful: it names the liked categories of the chunk (and, when a previous
/// summary is present, which of them are new). Candidates 1..n-1 copy it but
/// swap each category token for a different random one with probability
/// p_corrupt. Outputs depend only on (prompt, seed, candidate index).
///
/// yes_probability is 0.1 + 0.8 * (fraction of the target item's category
/// tokens found in the prompt's evidence section).
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockPolicy policy = {}) : policy_(policy) {}

  std::string id() const override;
  std::vector<std::string> generate(const GenRequest& req) override;
  double yes_probability(const std::string& prompt) override;

  /// The uncorrupted answer for a rendered interest or item prompt.
  std::string faithful_text(const std::string& rendered) const;

  const MockPolicy& policy() const { return policy_; }

 private:
  std::string corrupt(const std::string& text, std::uint64_t stream) const;

  MockPolicy policy_;
};

struct HttpOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080/v1"
  int timeout_ms = 30000;
  int retries = 2;
  int backoff_ms = 200;  // doubled after every failed attempt
};

/// JSON-over-HTTP backend:
///   POST {endpoint}/generate {"prompt","n","temperature","seed","max_tokens"} -> {"texts": [...]}
///   POST {endpoint}/yes_prob {"prompt"} -> {"p_yes": float}
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions opts);

  std::string id() const override;
  std::vector<std::string> generate(const GenRequest& req) override;
  double yes_probability(const std::string& prompt) override;

 private:
  HttpOptions opts_;
};

}  // namespace hitlbm::llm
