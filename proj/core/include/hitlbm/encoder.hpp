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
#include <mutex>
#include <string>
#include <unordered_map>

#include "hitlbm/llm/backend.hpp"
#include "hitlbm/nn/matrix.hpp"

namespace hitlbm::encoder {

/// Maps text to a fixed-width dense vector. Implementations are thread-safe.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
  virtual nn::Vector encode(const std::string& text) const = 0;
};

/// Deterministic bag-of-words encoder: every lower-cased word token owns a
/// pseudo-random Gaussian direction derived from its hash; a text is the sum
/// of its token directions, L2-normalised.
class HashEncoder final : public TextEncoder {
 public:
  explicit HashEncoder(std::size_t dim, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  std::string id() const override;
  nn::Vector encode(const std::string& text) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// POST {endpoint}/embed {"text": str} -> {"embedding": [float]}.
class HttpEncoder final : public TextEncoder {
 public:
  HttpEncoder(llm::HttpOptions opts, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  std::string id() const override { return "http(" + opts_.endpoint + ")"; }
  nn::Vector encode(const std::string& text) const override;

 private:
  llm::HttpOptions opts_;
  std::size_t dim_;
};

/// Memoises another encoder.
class CachingEncoder final : public TextEncoder {
 public:
  explicit CachingEncoder(std::shared_ptr<const TextEncoder> inner) : inner_(std::move(inner)) {}
  std::size_t dim() const override { return inner_->dim(); }
  std::string id() const override { return inner_->id(); }
  nn::Vector encode(const std::string& text) const override;

 private:
  std::shared_ptr<const TextEncoder> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, nn::Vector> memo_;
};

enum class EncoderKind { mock, http };

struct EncoderDescriptor {
  EncoderKind kind = EncoderKind::mock;
  std::string endpoint;
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  int timeout_ms = 30000;
  int retries = 2;
};

std::shared_ptr<const TextEncoder> make_encoder(const EncoderDescriptor& desc);

}  // namespace hitlbm::encoder
