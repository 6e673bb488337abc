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

#include "hitlbm/llm/gateway.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "hitlbm/error.hpp"
#include "hitlbm/io.hpp"

namespace hitlbm::llm {

namespace fs = std::filesystem;
using nlohmann::json;

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc, const MockPolicy& mock) {
  if (desc.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  switch (desc.kind) {
    case BackendKind::mock:
      return std::make_unique<MockBackend>(mock);
    case BackendKind::http:
      return std::make_unique<HttpBackend>(HttpOptions{desc.endpoint, desc.timeout_ms, desc.retries});
  }
  throw ConfigError("unknown backend kind");
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

std::string sha256_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::size_t max_in_flight, fs::path cache_dir)
    : backend_(std::move(backend)), cache_dir_(std::move(cache_dir)), limiter_(max_in_flight) {
  if (!backend_) throw PreconditionError("gateway needs a backend");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

namespace {

json generation_request(const GenRequest& req, const std::string& backend_id) {
  return json{{"op", "generate"},
              {"backend", backend_id},
              {"kind", to_string(req.kind)},
              {"rendered", req.rendered},
              {"n", req.n},
              {"temperature", req.temperature},
              {"seed", req.seed},
              {"max_tokens", req.max_tokens}};
}

json probability_request(const std::string& prompt, const std::string& backend_id) {
  return json{{"op", "yes_prob"}, {"backend", backend_id}, {"prompt", prompt}};
}

}  // namespace

std::string Gateway::generation_key(const GenRequest& req) const {
  return sha256_hex(generation_request(req, backend_->id()).dump());
}

std::string Gateway::probability_key(const std::string& prompt) const {
  return sha256_hex(probability_request(prompt, backend_->id()).dump());
}

fs::path Gateway::cache_path(const std::string& key) const { return cache_dir_ / key.substr(0, 2) / (key + ".json"); }

std::optional<json> Gateway::read_disk(const std::string& key, const std::function<bool(const json&)>& valid) const {
  if (cache_dir_.empty()) return std::nullopt;
  const fs::path p = cache_path(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  json entry = json::parse(ss.str(), nullptr, /*allow_exceptions=*/false);
  if (entry.is_discarded() || !entry.contains("response") || !valid(entry["response"])) return std::nullopt;
  return entry["response"];
}

void Gateway::write_disk(const std::string& key, const json& request, const json& response) {
  if (cache_dir_.empty()) return;
  const fs::path p = cache_path(key);
  fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(tmp_counter_.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << json{{"request", request}, {"response", response}}.dump();
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot publish cache entry " + p.string());
  }
}

json Gateway::cached(const std::string& key, const json& request, const std::function<json()>& compute,
                     const std::function<bool(const json&)>& valid) {
  std::promise<json> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      ++cache_hits_;
      return it->second;
    }
    if (auto it = pending_.find(key); it != pending_.end()) {
      auto fut = it->second;
      lock.unlock();
      ++cache_hits_;
      return fut.get();
    }
    pending_.emplace(key, promise.get_future().share());
  }

  json response;
  try {
    if (auto disk = read_disk(key, valid)) {
      ++cache_hits_;
      response = std::move(*disk);
    } else {
      limiter_.acquire();
      try {
        ++backend_calls_;
        response = compute();
      } catch (...) {
        limiter_.release();
        throw;
      }
      limiter_.release();
      write_disk(key, request, response);
    }
  } catch (...) {
    std::lock_guard lock(mu_);
    promise.set_exception(std::current_exception());
    pending_.erase(key);
    throw;
  }

  std::lock_guard lock(mu_);
  memory_.emplace(key, response);
  promise.set_value(response);
  pending_.erase(key);
  return response;
}

std::vector<std::string> Gateway::sample_candidates(const GenRequest& req) {
  req.validate();
  const json request = generation_request(req, backend_->id());
  const std::string key = sha256_hex(request.dump());
  const json response = cached(
      key, request, [&] { return json{{"texts", backend_->generate(req)}}; },
      [&](const json& r) { return r.contains("texts") && r["texts"].is_array() && r["texts"].size() == req.n; });
  auto texts = response.at("texts").get<std::vector<std::string>>();
  if (texts.size() != req.n) {
    throw ProtocolError("backend returned " + std::to_string(texts.size()) + " candidates, expected " +
                        std::to_string(req.n));
  }
  return texts;
}

double Gateway::yes_probability(const std::string& prompt) {
  const json request = probability_request(prompt, backend_->id());
  const std::string key = sha256_hex(request.dump());
  const json response = cached(
      key, request, [&] { return json{{"p_yes", std::clamp(backend_->yes_probability(prompt), 0.0, 1.0)}}; },
      [](const json& r) { return r.contains("p_yes") && r["p_yes"].is_number(); });
  return std::clamp(response.at("p_yes").get<double>(), 0.0, 1.0);
}

}  // namespace hitlbm::llm
