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

#include "hitlbm/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "hitlbm/error.hpp"
#include "hitlbm/io.hpp"

namespace hitlbm::pipeline {

namespace {

// ---- value formatting / parsing ---------------------------------------------

// Seeds (uint64) share the size_t overloads.
static_assert(std::is_same_v<std::uint64_t, std::size_t>);

std::string format(const std::string& v) { return v; }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(int v) { return std::to_string(v); }
std::string format(std::size_t v) { return std::to_string(v); }

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string format(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format(v[i]);
  return out;
}

std::string format(const behavior::LabelPolicy& p) { return p.to_string(); }
std::string format(synth::DriftKind k) { return k == synth::DriftKind::switch_at ? "switch_at" : "random_walk"; }
std::string format(llm::BackendKind k) { return k == llm::BackendKind::mock ? "mock" : "http"; }
std::string format(encoder::EncoderKind k) { return k == encoder::EncoderKind::mock ? "mock" : "http"; }
std::string format(fusion::Variant v) { return std::string(fusion::to_string(v)); }
std::string format(fusion::CrossMode m) { return std::string(fusion::to_string(m)); }

template <typename T>
T parse_integer(std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("'" + std::string(text) + "' is not a valid " +
                      (std::is_signed_v<T> ? "integer" : "non-negative integer"));
  }
  return v;
}

void parse(std::string_view t, std::string& out) { out = std::string(t); }
void parse(std::string_view t, int& out) { out = parse_integer<int>(t); }
void parse(std::string_view t, std::size_t& out) { out = parse_integer<std::size_t>(t); }

void parse(std::string_view t, double& out) {
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("'" + std::string(t) + "' is not a finite number");
  }
  out = v;
}

void parse(std::string_view t, bool& out) {
  if (t == "true" || t == "1" || t == "yes") {
    out = true;
  } else if (t == "false" || t == "0" || t == "no") {
    out = false;
  } else {
    throw ConfigError("'" + std::string(t) + "' is not a boolean (true/false)");
  }
}

template <typename T>
void parse(std::string_view t, std::vector<T>& out) {
  out.clear();
  if (t.empty()) return;
  std::size_t start = 0;
  while (true) {
    const auto comma = t.find(',', start);
    std::string_view item = t.substr(start, comma == std::string_view::npos ? t.npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    T v{};
    parse(item, v);
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

void parse(std::string_view t, behavior::LabelPolicy& out) { out = behavior::LabelPolicy::parse(std::string(t)); }

void parse(std::string_view t, synth::DriftKind& out) {
  if (t == "switch_at") {
    out = synth::DriftKind::switch_at;
  } else if (t == "random_walk") {
    out = synth::DriftKind::random_walk;
  } else {
    throw ConfigError("unknown drift '" + std::string(t) + "' (expected switch_at or random_walk)");
  }
}

template <typename Kind>
void parse_backend(std::string_view t, Kind& out) {
  if (t == "mock") {
    out = Kind::mock;
  } else if (t == "http") {
    out = Kind::http;
  } else {
    throw ConfigError("unknown backend '" + std::string(t) + "' (expected mock or http)");
  }
}

void parse(std::string_view t, llm::BackendKind& out) { parse_backend(t, out); }
void parse(std::string_view t, encoder::EncoderKind& out) { parse_backend(t, out); }
void parse(std::string_view t, fusion::Variant& out) { out = fusion::parse_variant(t); }
void parse(std::string_view t, fusion::CrossMode& out) { out = fusion::parse_cross_mode(t); }

// ---- field table ------------------------------------------------------------

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

#define HITLBM_FIELD(section, key, member)                                 \
  Field {                                                                  \
    section, key, [](const PipelineConfig& c) { return format(c.member); }, \
        [](PipelineConfig& c, std::string_view v) { parse(v, c.member); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      HITLBM_FIELD("general", "work_dir", general.work_dir),
      HITLBM_FIELD("general", "workers", general.workers),

      HITLBM_FIELD("data", "input", data.input),
      HITLBM_FIELD("data", "label_policy", data.label_policy),
      HITLBM_FIELD("data", "min_reviews", data.min_reviews),
      HITLBM_FIELD("data", "split_ratio", data.split_ratio),

      HITLBM_FIELD("synth", "n_categories", synth.n_categories),
      HITLBM_FIELD("synth", "n_items", synth.n_items),
      HITLBM_FIELD("synth", "n_users", synth.n_users),
      HITLBM_FIELD("synth", "chunks_per_user", synth.chunks_per_user),
      HITLBM_FIELD("synth", "chunk_len", synth.chunk_len),
      HITLBM_FIELD("synth", "drift", synth.drift.kind),
      HITLBM_FIELD("synth", "switch_chunk", synth.drift.switch_chunk),
      HITLBM_FIELD("synth", "sigma", synth.drift.sigma),
      HITLBM_FIELD("synth", "noise", synth.noise),
      HITLBM_FIELD("synth", "preference_skew", synth.preference_skew),
      HITLBM_FIELD("synth", "seed", synth.seed),

      HITLBM_FIELD("chunk", "L", L),

      HITLBM_FIELD("llm", "backend", llm.backend),
      HITLBM_FIELD("llm", "endpoint", llm.endpoint),
      HITLBM_FIELD("llm", "max_in_flight", llm.max_in_flight),
      HITLBM_FIELD("llm", "cache_dir", llm.cache_dir),
      HITLBM_FIELD("llm", "timeout_ms", llm.timeout_ms),
      HITLBM_FIELD("llm", "retries", llm.retries),
      HITLBM_FIELD("llm", "temperature", llm.temperature),
      HITLBM_FIELD("llm", "max_tokens", llm.max_tokens),
      HITLBM_FIELD("llm", "item_seed", llm.item_seed),
      HITLBM_FIELD("llm", "mock_n_categories", llm.mock_n_categories),
      HITLBM_FIELD("llm", "mock_p_corrupt", llm.mock_p_corrupt),
      HITLBM_FIELD("llm", "mock_max_interest_tokens", llm.mock_max_interest_tokens),

      HITLBM_FIELD("encoder", "backend", encoder.backend),
      HITLBM_FIELD("encoder", "endpoint", encoder.endpoint),
      HITLBM_FIELD("encoder", "d", encoder.d),
      HITLBM_FIELD("encoder", "seed", encoder.seed),

      HITLBM_FIELD("rating", "n_eval", rating.n_eval),
      HITLBM_FIELD("rating", "K", rating.K),
      HITLBM_FIELD("rating", "eval_seed", rating.eval_seed),
      HITLBM_FIELD("rating", "lr", rating.lr),
      HITLBM_FIELD("rating", "epochs", rating.epochs),
      HITLBM_FIELD("rating", "batch", rating.batch),
      HITLBM_FIELD("rating", "hidden", rating.hidden),
      HITLBM_FIELD("rating", "seed", rating.seed),

      HITLBM_FIELD("search", "n_expand", search.n_expand),
      HITLBM_FIELD("search", "alpha", search.alpha),
      HITLBM_FIELD("search", "seed", search.seed),

      HITLBM_FIELD("fusion", "variant", fusion.variant),
      HITLBM_FIELD("fusion", "cross_mode", fusion.cross_mode),

      HITLBM_FIELD("ctr", "d_id", ctr.d_id),
      HITLBM_FIELD("ctr", "window", ctr.window),
      HITLBM_FIELD("ctr", "hidden", ctr.hidden),
      HITLBM_FIELD("ctr", "lr", ctr.lr),
      HITLBM_FIELD("ctr", "epochs", ctr.epochs),
      HITLBM_FIELD("ctr", "batch", ctr.batch),
      HITLBM_FIELD("ctr", "seed", ctr.seed),
      HITLBM_FIELD("ctr", "use_e_user", ctr.use_e_user),
      HITLBM_FIELD("ctr", "use_e_item", ctr.use_e_item),

      HITLBM_FIELD("ablation", "seeds", ablation.seeds),
      HITLBM_FIELD("ablation", "fusion_variants", ablation.fusion_variants),
  };
  return table;
}

#undef HITLBM_FIELD

std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  std::size_t e = s.size();
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  if (lead) *lead = b;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(std::size_t line, std::size_t col, const std::string& why) {
  throw ParseError("config line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + why, line, col);
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError(key + " " + why);
}

}  // namespace

void PipelineConfig::validate() const {
  require(general.workers >= 1, "general.workers", "must be >= 1");
  require(data.split_ratio > 0.0 && data.split_ratio < 1.0, "data.split_ratio", "must lie strictly between 0 and 1");
  try {
    synth.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  require(L >= 1, "chunk.L", "must be >= 1");
  require(llm.max_in_flight >= 1, "llm.max_in_flight", "must be >= 1");
  require(llm.backend != llm::BackendKind::http || !llm.endpoint.empty(), "llm.endpoint", "is required for the http backend");
  require(llm.timeout_ms > 0, "llm.timeout_ms", "must be > 0");
  require(llm.retries >= 0, "llm.retries", "must be >= 0");
  require(llm.temperature >= 0.0, "llm.temperature", "must be >= 0");
  require(llm.max_tokens >= 1, "llm.max_tokens", "must be >= 1");
  require(llm.mock_n_categories >= 1, "llm.mock_n_categories", "must be >= 1");
  require(llm.mock_p_corrupt >= 0.0 && llm.mock_p_corrupt <= 1.0, "llm.mock_p_corrupt", "must lie in [0, 1]");
  require(llm.mock_max_interest_tokens >= 1, "llm.mock_max_interest_tokens", "must be >= 1");
  require(encoder.backend != encoder::EncoderKind::http || !encoder.endpoint.empty(), "encoder.endpoint",
          "is required for the http encoder");
  require(encoder.d >= 1, "encoder.d", "must be >= 1");
  require(rating.n_eval >= 1, "rating.n_eval", "must be >= 1");
  require(rating.K >= 1, "rating.K", "must be >= 1");
  require(rating.lr >= 0.0, "rating.lr", "must be >= 0");
  require(search.n_expand >= 1, "search.n_expand", "must be >= 1");
  require(search.alpha >= 0.0 && search.alpha <= 1.0, "search.alpha", "must lie in [0, 1]");
  require(ctr.d_id >= 1, "ctr.d_id", "must be >= 1");
  require(ctr.lr >= 0.0, "ctr.lr", "must be >= 0");
  require(!ablation.seeds.empty(), "ablation.seeds", "must list at least one seed");
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::filesystem::path PipelineConfig::cache_dir() const {
  if (const char* env = std::getenv("HITLBM_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  if (!llm.cache_dir.empty()) return resolve(llm.cache_dir);
  return work_dir() / "llm_cache";
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::set<std::string_view> sections;
  for (const auto& f : fields()) sections.insert(f.section);

  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::size_t lead = 0;
    const std::string_view line = trim(raw, &lead);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, lead + line.size(), "expected ']' to close the section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!sections.count(name)) fail(line_no, lead + 2, "unknown section [" + std::string(name) + "]");
      section = std::string(name);
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, lead + 1, "expected 'key = value'");
    if (section.empty()) fail(line_no, lead + 1, "key outside of any [section]");
    const std::string_view key = trim(line.substr(0, eq));
    std::size_t value_lead = 0;
    const std::string_view value = trim(line.substr(eq + 1), &value_lead);
    if (key.empty()) fail(line_no, lead + 1, "missing key before '='");

    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) fail(line_no, lead + 1, "unknown key '" + std::string(key) + "' in [" + section + "]");
    if (!seen.insert(section + "." + std::string(key)).second) {
      fail(line_no, lead + 1, "duplicate key '" + std::string(key) + "' in [" + section + "]");
    }
    try {
      field->set(cfg, value);
    } catch (const Error& e) {
      fail(line_no, lead + eq + 1 + value_lead + 1, section + "." + std::string(key) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  PipelineConfig cfg = parse_config(io::read_text(path));
  cfg.base_dir = path.parent_path();
  return cfg;
}

std::string echo_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  std::string_view section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    const std::string value = f.get(cfg);
    out << f.key << (value.empty() ? " =" : " = ") << value << '\n';
  }
  return out.str();
}

}  // namespace hitlbm::pipeline
