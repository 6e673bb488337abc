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

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/llm/backend.hpp"

namespace hitlbm::llm {

enum class BackendKind { mock, http };

struct BackendDescriptor {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // http only
  std::size_t max_in_flight = 4;
  std::filesystem::path cache_dir;  // empty: in-memory cache only
  int timeout_ms = 30000;
  int retries = 2;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc, const MockPolicy& mock = {});

/// Counting limiter on concurrent backend calls.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : available_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

/// Hex SHA-256 of `text`.
std::string sha256_hex(std::string_view text);

/// Fronts a Backend with a content-addressed response cache and a limit on
/// concurrent calls. Identical requests are served from the cache (memory,
/// then {cache_dir}/{key[0:2]}/{key}.json); concurrent identical requests
/// share one backend call. Thread-safe.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::size_t max_in_flight = 4, std::filesystem::path cache_dir = {});

  std::vector<std::string> sample_candidates(const GenRequest& req);
  double yes_probability(const std::string& prompt);

  /// Cache key of a generation request (canonical JSON, hashed).
  std::string generation_key(const GenRequest& req) const;
  std::string probability_key(const std::string& prompt) const;
  std::filesystem::path cache_path(const std::string& key) const;

  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  const Backend& backend() const { return *backend_; }

 private:
  nlohmann::json cached(const std::string& key, const nlohmann::json& request,
                        const std::function<nlohmann::json()>& compute,
                        const std::function<bool(const nlohmann::json&)>& valid);
  std::optional<nlohmann::json> read_disk(const std::string& key,
                                          const std::function<bool(const nlohmann::json&)>& valid) const;
  void write_disk(const std::string& key, const nlohmann::json& request, const nlohmann::json& response);

  std::shared_ptr<Backend> backend_;
  std::filesystem::path cache_dir_;
  InFlightLimiter limiter_;
  std::mutex mu_;
  std::unordered_map<std::string, nlohmann::json> memory_;
  std::unordered_map<std::string, std::shared_future<nlohmann::json>> pending_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::uint64_t> tmp_counter_{0};
};

}  // namespace hitlbm::llm
