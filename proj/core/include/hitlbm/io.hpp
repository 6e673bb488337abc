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

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hitlbm::io {

using nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line. JSON syntax
/// errors raise ParseError carrying the 1-based line number.
void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);

json read_json(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Appends one compact JSON document per line.
class JsonlBuffer {
 public:
  void add(const json& record);
  const std::string& str() const { return buf_; }
  void write(const std::filesystem::path& path) const { write_atomic(path, buf_); }

 private:
  std::string buf_;
};

}  // namespace hitlbm::io
