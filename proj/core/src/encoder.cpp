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

#include "hitlbm/encoder.hpp"

#include <cctype>
#include <cmath>

#include "hitlbm/error.hpp"
#include "hitlbm/rng.hpp"
#include "llm/http_client.hpp"

namespace hitlbm::encoder {

HashEncoder::HashEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ConfigError("encoder dimension must be >= 1");
}

std::string HashEncoder::id() const {
  return "hash(dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_) + ")";
}

nn::Vector HashEncoder::encode(const std::string& text) const {
  nn::Vector v(dim_, 0.0);
  auto add_token = [&](std::string_view token) {
    Rng rng(mix_seed(fnv1a64(token), seed_));
    for (double& x : v) x += rng.normal();
  };
  std::string token;
  bool any = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) != 0 || c == '_') {
      token += static_cast<char>(std::tolower(u));
    } else if (!token.empty()) {
      add_token(token);
      any = true;
      token.clear();
    }
  }
  if (!token.empty()) {
    add_token(token);
    any = true;
  }
  if (!any) add_token("<empty>");

  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

HttpEncoder::HttpEncoder(llm::HttpOptions opts, std::size_t dim) : opts_(std::move(opts)), dim_(dim) {
  if (opts_.endpoint.empty()) throw ConfigError("http encoder needs an endpoint");
}

nn::Vector HttpEncoder::encode(const std::string& text) const {
  const auto res = llm::detail::post_json(opts_, "/embed", {{"text", text}});
  auto emb = res.find("embedding");
  if (emb == res.end() || !emb->is_array()) throw ProtocolError("/embed response lacks an 'embedding' array");
  nn::Vector v = emb->get<nn::Vector>();
  if (v.size() != dim_) {
    throw DimensionError("encoder returned dimension " + std::to_string(v.size()) + ", configured " +
                         std::to_string(dim_));
  }
  return v;
}

nn::Vector CachingEncoder::encode(const std::string& text) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(text); it != memo_.end()) return it->second;
  }
  nn::Vector v = inner_->encode(text);
  std::lock_guard lock(mu_);
  return memo_.emplace(text, std::move(v)).first->second;
}

std::shared_ptr<const TextEncoder> make_encoder(const EncoderDescriptor& desc) {
  std::shared_ptr<const TextEncoder> inner;
  if (desc.kind == EncoderKind::mock) {
    inner = std::make_shared<HashEncoder>(desc.dim, desc.seed);
  } else {
    inner = std::make_shared<HttpEncoder>(llm::HttpOptions{desc.endpoint, desc.timeout_ms, desc.retries}, desc.dim);
  }
  return std::make_shared<CachingEncoder>(std::move(inner));
}

}  // namespace hitlbm::encoder
