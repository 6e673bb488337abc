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
#include <chrono>
#include <thread>

#include <httplib.h>

#include "hitlbm/error.hpp"
#include "hitlbm/llm/backend.hpp"
#include "http_client.hpp"

namespace hitlbm::llm {

namespace detail {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint '" + url + "' must include a scheme");
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  if (slash != std::string::npos) e.prefix = url.substr(slash);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

}  // namespace

nlohmann::json post_json(const HttpOptions& opts, const std::string& path, const nlohmann::json& body) {
  const Endpoint ep = split_endpoint(opts.endpoint);
  httplib::Client client(ep.origin);
  const auto timeout = std::chrono::milliseconds(std::max(1, opts.timeout_ms));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const int attempts = 1 + std::max(0, opts.retries);
  const std::string payload = body.dump();
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(ep.prefix + path, payload, "application/json");
    if (res && res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError("POST " + path + ": response is not JSON: " + e.what());
      }
    }
    if (res && res->status < 500) {
      throw ProtocolError("POST " + path + ": HTTP status " + std::to_string(res->status));
    }
    last_error = res ? "HTTP status " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(opts.backoff_ms) * (1 << (attempt - 1)));
    }
  }
  throw TransportError("POST " + opts.endpoint + path + " failed: " + last_error, attempts);
}

}  // namespace detail

HttpBackend::HttpBackend(HttpOptions opts) : opts_(std::move(opts)) {
  if (opts_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
}

std::string HttpBackend::id() const { return "http(" + opts_.endpoint + ")"; }

std::vector<std::string> HttpBackend::generate(const GenRequest& req) {
  req.validate();
  const nlohmann::json body = {{"prompt", req.rendered},
                               {"n", req.n},
                               {"temperature", req.temperature},
                               {"seed", req.seed},
                               {"max_tokens", req.max_tokens}};
  const auto res = detail::post_json(opts_, "/generate", body);
  auto texts = res.find("texts");
  if (texts == res.end() || !texts->is_array()) throw ProtocolError("/generate response lacks a 'texts' array");
  std::vector<std::string> out;
  for (const auto& t : *texts) {
    if (!t.is_string()) throw ProtocolError("/generate returned a non-string text");
    out.push_back(t.get<std::string>());
  }
  if (out.size() != req.n) {
    throw ProtocolError("/generate returned " + std::to_string(out.size()) + " texts, expected " +
                        std::to_string(req.n));
  }
  return out;
}

double HttpBackend::yes_probability(const std::string& prompt) {
  const auto res = detail::post_json(opts_, "/yes_prob", {{"prompt", prompt}});
  auto p = res.find("p_yes");
  if (p == res.end() || !p->is_number()) throw ProtocolError("/yes_prob response lacks a numeric 'p_yes'");
  return std::clamp(p->get<double>(), 0.0, 1.0);
}

}  // namespace hitlbm::llm
