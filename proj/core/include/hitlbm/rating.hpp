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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/behavior.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/nn/mlp.hpp"

namespace hitlbm::rating {

struct EvalSample {
  behavior::Interaction item;
  int label = 0;
};

/// Balanced positives/negatives drawn from the chunk after the one being graded.
struct EvalSet {
  std::size_t chunk_index = 0;  // t: the graded chunk (samples come from t + 1)
  std::size_t n = 0;            // requested per-class count
  std::vector<EvalSample> samples;
};

/// min(n, available) of each class, equalised down to the smaller class and
/// sampled without replacement. nullopt when `next_chunk` lacks a class (skip).
std::optional<EvalSet> build_eval_set(const behavior::BehaviorChunk& next_chunk, std::size_t n, std::uint64_t seed);

/// AUC of the backend's yes-probabilities on `eval` when the prompt carries
/// the evidence of `variant` (seq: previous interests, point: current
/// interest, hist: the chunk itself). `ctx.item` is filled per sample.
double variant_auc(llm::PromptKind variant, const llm::PromptContext& ctx, const EvalSet& eval, llm::Gateway& gateway,
                   const llm::PromptOptions& opts = {});

struct AucDiagnostics {
  double seq = 0.0;
  double point = 0.0;
  double hist = 0.0;
};

/// 1 iff the current interest beats the previous ones (strictly).
int continuity_label(const AucDiagnostics& auc);
/// 1 iff the current interest beats the raw chunk (strictly).
int effectiveness_label(const AucDiagnostics& auc);

enum class ExampleKind { cont, eff };

struct RatingExample {
  ExampleKind kind = ExampleKind::cont;
  std::string user_id;
  std::size_t chunk_index = 0;
  std::vector<std::string> prev_texts;  // cont only, at most K
  std::string current_text;
  int label = 0;
  AucDiagnostics diagnostics;
};

nlohmann::json to_json(const RatingExample& ex);
RatingExample rating_example_from_json(const nlohmann::json& j);

/// One plain cascade pass for a user: chunk i with the interest generated for it.
struct CascadeStep {
  behavior::BehaviorChunk chunk;
  std::string interest;
};

struct CascadeUser {
  std::string user_id;
  std::vector<CascadeStep> steps;
};

struct RatingDataOptions {
  std::size_t n_eval = 6;
  std::size_t k_prev = 1;
  std::uint64_t seed = 0;
  llm::PromptOptions prompt;
};

struct RatingDatasets {
  std::vector<RatingExample> cont;
  std::vector<RatingExample> eff;
  std::size_t skipped_chunks = 0;
};

/// Rating examples of one user: every chunk t with a successor whose eval set
/// has both classes yields one cont and one eff example.
RatingDatasets build_user_rating_data(const CascadeUser& user, const RatingDataOptions& opts, llm::Gateway& gateway);

/// All users, in input order.
RatingDatasets build_rating_datasets(const std::vector<CascadeUser>& users, const RatingDataOptions& opts,
                                     llm::Gateway& gateway, std::size_t workers = 1);

enum class RaterKind { srm, prm };

std::string_view to_string(RaterKind kind);

struct RatingHyper {
  double lr = 1e-2;
  std::size_t epochs = 200;
  std::size_t batch = 0;  // 0: full batch
  std::vector<std::size_t> hidden{64, 32};
  std::uint64_t seed = 1;
};

/// Encoder + aggregation + sigmoid MLP. SRM aggregates the K previous
/// interests together with the current one; PRM sees the current one only.
class RatingModel {
 public:
  RatingModel() = default;
  RatingModel(RaterKind kind, std::size_t encoder_dim, std::size_t k_prev, std::vector<std::size_t> hidden);

  /// Mean over texts of [encode(text), position], with position (i+1)/n for
  /// the i-th of n texts (the current text is last, so it alone gives 1).
  nn::Vector features(const std::vector<std::string>& prev_texts, const std::string& current,
                      const encoder::TextEncoder& enc) const;

  double score_features(std::span<const double> features) const;
  double score(const std::vector<std::string>& prev_texts, const std::string& current,
               const encoder::TextEncoder& enc) const;

  RaterKind kind() const { return kind_; }
  std::size_t encoder_dim() const { return encoder_dim_; }
  std::size_t k_prev() const { return k_prev_; }
  const nn::Mlp& mlp() const { return mlp_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  nlohmann::json to_json() const;
  static RatingModel from_json(const nlohmann::json& j);

 private:
  RaterKind kind_ = RaterKind::prm;
  std::size_t encoder_dim_ = 0;
  std::size_t k_prev_ = 1;
  nn::Mlp mlp_;
  nn::ParamStore params_;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // loss before each epoch's updates
  double final_loss = 0.0;
};

/// Trains on precomputed feature rows. Throws TrainingError on single-class labels.
RatingModel train_on_features(RaterKind kind, std::size_t encoder_dim, std::size_t k_prev, const nn::Matrix& x,
                              std::span<const double> labels, const RatingHyper& hyper, TrainReport* report = nullptr);

/// Encodes the examples and trains. cont examples feed SRM, eff examples PRM.
RatingModel train_rating_model(RaterKind kind, const std::vector<RatingExample>& data, const encoder::TextEncoder& enc,
                               std::size_t k_prev, const RatingHyper& hyper, TrainReport* report = nullptr);

/// Scores of `model` on `data` rows, for training diagnostics.
std::vector<double> predict_all(const RatingModel& model, const nn::Matrix& x);

}  // namespace hitlbm::rating
