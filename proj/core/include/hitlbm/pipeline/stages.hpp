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

#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hitlbm/pipeline/config.hpp"

namespace hitlbm::pipeline {

enum class Stage {
  synth,
  ingest,
  chunk,
  cascade,
  build_rating_data,
  train_rating,
  search,
  fuse,
  train_ctr,
  evaluate,
  ablate,
};

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);
/// All stages in dependency order.
const std::vector<Stage>& all_stages();

// Artifact file names inside the work directory.
namespace artifact {
inline constexpr std::string_view kInteractions = "interactions.jsonl";
inline constexpr std::string_view kGroundTruth = "ground_truth.jsonl";
inline constexpr std::string_view kCatalog = "catalog.jsonl";
inline constexpr std::string_view kTrain = "train.jsonl";
inline constexpr std::string_view kTest = "test.jsonl";
inline constexpr std::string_view kChunks = "chunks.jsonl";
inline constexpr std::string_view kCascade = "cascade.jsonl";
inline constexpr std::string_view kRatingTrain = "rating_train.jsonl";
inline constexpr std::string_view kRatingSummary = "rating_data_summary.json";
inline constexpr std::string_view kSrm = "srm.json";
inline constexpr std::string_view kPrm = "prm.json";
inline constexpr std::string_view kInterests = "interests.jsonl";
inline constexpr std::string_view kCtrSamples = "ctr_samples.jsonl";
inline constexpr std::string_view kFusionParams = "fusion_params.json";
inline constexpr std::string_view kFused = "fused.jsonl";
inline constexpr std::string_view kCtrModel = "ctr_model.json";
inline constexpr std::string_view kMetrics = "metrics.json";
inline constexpr std::string_view kAblation = "ablation_report.json";
}  // namespace artifact

/// Files a stage writes, relative to the work directory.
std::vector<std::string> stage_outputs(Stage stage);

struct RunOptions {
  std::size_t workers = 0;  // 0: general.workers from the config
  bool force = false;       // re-run even when every output exists
  std::ostream* log = nullptr;
};

struct StageResult {
  bool skipped = false;
  std::vector<std::filesystem::path> outputs;
};

/// Runs one stage. Validates the config first; missing inputs raise
/// UpstreamMissing naming the producing stage.
StageResult run_stage(Stage stage, const PipelineConfig& cfg, const RunOptions& opts = {});

/// Process exit status for an error escaping a stage:
/// 2 config, 3 missing upstream artifact, 4 backend/transport, 1 anything else.
int exit_code_for(const std::exception& e);

/// Validates the config and checks that the work directory is writable.
void validate_environment(const PipelineConfig& cfg);

}  // namespace hitlbm::pipeline
