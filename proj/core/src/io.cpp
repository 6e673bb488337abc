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

#include "hitlbm/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "hitlbm/error.hpp"

namespace hitlbm::io {

namespace fs = std::filesystem;

void for_each_jsonl(const fs::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no, e.byte);
    }
    fn(record, line_no);
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  for_each_jsonl(path, [&](const json& r, std::size_t) { out.push_back(r); });
  return out;
}

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0, e.byte);
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot publish " + path.string() + ": " + ec.message());
}

void JsonlBuffer::add(const json& record) {
  buf_ += record.dump();
  buf_ += '\n';
}

}  // namespace hitlbm::io
