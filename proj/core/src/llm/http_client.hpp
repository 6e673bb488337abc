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

#include <string>

#include <nlohmann/json.hpp>

#include "hitlbm/llm/backend.hpp"

namespace hitlbm::llm::detail {

/// POSTs `body` to {endpoint}{path}. Connection failures, timeouts and 5xx
/// responses are retried with doubling backoff; other non-200 statuses and
/// unparsable bodies raise ProtocolError.
nlohmann::json post_json(const HttpOptions& opts, const std::string& path, const nlohmann::json& body);

}  // namespace hitlbm::llm::detail
