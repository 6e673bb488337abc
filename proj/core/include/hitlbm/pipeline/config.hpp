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
#include <filesystem>
#include <string>
#include <vector>

#include "hitlbm/behavior.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/fusion.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/synth.hpp"

namespace hitlbm::pipeline {

struct GeneralSection {
  std::string work_dir = "work";
  std::size_t workers = 1;
};

struct DataSection {
  std::string input;  // empty: the synth stage's interactions.jsonl
  behavior::LabelPolicy label_policy = behavior::LabelPolicy::movielens();
  std::size_t min_reviews = 50;
  double split_ratio = 0.9;
};

struct LlmSection {
  llm::BackendKind backend = llm::BackendKind::mock;
  std::string endpoint;
  std::size_t max_in_flight = 4;
  std::string cache_dir;  // empty: <work_dir>/llm_cache
  int timeout_ms = 30000;
  int retries = 2;
  double temperature = 1.0;
  std::size_t max_tokens = 256;
  std::size_t mock_n_categories = 10;
  double mock_p_corrupt = 0.8;
  std::size_t mock_max_interest_tokens = 3;
  std::uint64_t item_seed = 0;
};

struct EncoderSection {
  encoder::EncoderKind backend = encoder::EncoderKind::mock;
  std::string endpoint;
  std::size_t d = 64;
  std::uint64_t seed = 0;
};

struct RatingSection {
  std::size_t n_eval = 6;
  std::size_t K = 1;
  std::uint64_t eval_seed = 3;
  double lr = 1e-2;
  std::size_t epochs = 200;
  std::size_t batch = 0;
  std::vector<std::size_t> hidden{64, 32};
  std::uint64_t seed = 1;
};

struct SearchSection {
  std::size_t n_expand = 10;
  double alpha = 0.5;
  std::uint64_t seed = 5;
};

struct FusionSection {
  fusion::Variant variant = fusion::Variant::tif;
  fusion::CrossMode cross_mode = fusion::CrossMode::item_query;
};

struct CtrSection {
  std::size_t d_id = 16;
  std::size_t window = 10;
  std::vector<std::size_t> hidden{64, 32};
  double lr = 2e-3;
  std::size_t epochs = 4;
  std::size_t batch = 256;
  std::uint64_t seed = 1;
  bool use_e_user = true;
  bool use_e_item = true;
};

struct AblationSection {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool fusion_variants = false;
};

struct PipelineConfig {
  GeneralSection general;
  DataSection data;
  synth::SynthConfig synth;
  std::size_t L = 50;
  LlmSection llm;
  EncoderSection encoder;
  RatingSection rating;
  SearchSection search;
  FusionSection fusion;
  CtrSection ctr;
  AblationSection ablation;

  /// Directory relative paths are resolved against (the config file's).
  std::filesystem::path base_dir;

  /// Range checks. Throws ConfigError naming the offending key.
  void validate() const;

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path work_dir() const { return resolve(general.work_dir); }
  /// HITLBM_CACHE_DIR, else llm.cache_dir, else <work_dir>/llm_cache.
  std::filesystem::path cache_dir() const;
};

/// Parses the section/key = value format. Unknown sections or keys and
/// malformed values raise ParseError with line and column.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value; parse_config(echo_config(c)) == c.
std::string echo_config(const PipelineConfig& cfg);

}  // namespace hitlbm::pipeline
