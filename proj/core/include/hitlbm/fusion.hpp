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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/behavior.hpp"
#include "hitlbm/encoder.hpp"
#include "hitlbm/llm/gateway.hpp"
#include "hitlbm/nn/ops.hpp"
#include "hitlbm/nn/params.hpp"

namespace hitlbm::fusion {

using nn::Matrix;
using nn::Vector;

/// T x d matrix of encoded interests. Throws DimensionError if the encoder
/// width differs from `d`.
Matrix encode_interests(const std::vector<std::string>& interests, const encoder::TextEncoder& enc, std::size_t d);

/// Fixed sinusoidal encoding: pos[j][2i] = sin(j / 10000^(2i/d)), pos[j][2i+1] = cos(same).
Matrix sinusoidal_positions(std::size_t t, std::size_t d);

/// Row j = e_j * s_j + pos_j. Scores must lie in [0, 1].
Matrix weight_and_position(const Matrix& e, std::span<const double> scores);
Matrix weight_and_position(const Matrix& e, std::span<const double> scores, const Matrix& positions);

struct SelfAttentionResult {
  Matrix out;
  nn::AttentionCache cache;
};

/// Causally masked single-head self-attention: row j attends to rows <= j.
SelfAttentionResult masked_self_attention(const Matrix& r, const Matrix& wq, const Matrix& wk, const Matrix& wv);

enum class CrossMode { item_query, literal };

std::string_view to_string(CrossMode mode);
CrossMode parse_cross_mode(std::string_view text);

struct CrossAttentionResult {
  Vector e_user;
  Vector weights;  // item_query: one weight per chunk row
  nn::AttentionCache cache;
};

/// item_query: the item projection queries the chunk rows as keys/values.
/// literal: chunk rows query the item as the only key; rows are averaged.
CrossAttentionResult target_cross_attention(const Matrix& r_star, std::span<const double> e_item, const Matrix& wq,
                                            const Matrix& wk, const Matrix& wv, CrossMode mode = CrossMode::item_query);

/// Encoded answer to the item knowledge prompt (one sample, fixed seed).
Vector item_knowledge_vector(const behavior::Interaction& item, llm::Gateway& gateway, const encoder::TextEncoder& enc,
                             std::uint64_t seed = 0);

enum class Variant { mean_pool, mlp, self_attention, tif };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct FusionConfig {
  std::size_t d = 64;
  Variant variant = Variant::tif;
  CrossMode mode = CrossMode::item_query;
};

/// Trainable interest fusion. Parameters live in an external store under
/// "fusion/...". The per-user state is computed once and reused for every
/// target item of that user; gradients from the items are accumulated in a
/// UserGrad and pushed into the parameters by user_backward().
class FusionModel {
 public:
  FusionModel() = default;
  explicit FusionModel(FusionConfig cfg);

  void init(nn::ParamStore& store, Rng& rng) const;
  const FusionConfig& config() const { return cfg_; }
  bool has_params() const { return cfg_.variant != Variant::mean_pool; }
  /// e_user does not depend on the target item.
  bool item_independent() const { return cfg_.variant != Variant::tif; }

  struct UserState {
    Matrix e;       // encoded interests
    Matrix r;       // weighted + positioned (tif) or e
    Matrix r_star;  // after self-attention (tif, self_attention)
    nn::AttentionCache sa;
    Matrix pre;     // mlp pre-activation
    Matrix proj_a;  // item_query: R* Wk; literal: R* Wq
    Matrix proj_b;  // item_query: R* Wv
    Vector pooled;  // item-independent output
  };

  UserState prepare(const nn::ParamStore& store, const Matrix& e, std::span<const double> scores) const;

  struct ItemCache {
    nn::AttentionCache attn;
  };

  Vector user_vector(const nn::ParamStore& store, const UserState& state, std::span<const double> e_item,
                     ItemCache* cache = nullptr) const;

  struct UserGrad {
    Matrix d_proj_a;
    Matrix d_proj_b;
    Vector d_pooled;
  };

  UserGrad make_grad(const UserState& state) const;
  void item_backward(nn::ParamStore& store, const UserState& state, std::span<const double> e_item,
                     const ItemCache& cache, std::span<const double> d_user, UserGrad& acc) const;
  void user_backward(nn::ParamStore& store, const UserState& state, const UserGrad& acc) const;

  nlohmann::json config_json() const;
  static FusionConfig config_from_json(const nlohmann::json& j);

 private:
  FusionConfig cfg_;
};

/// e_user / e_item of one (user, item) pair.
struct FusedRecord {
  std::string user_id;
  std::string item_id;
  Vector e_user;
  Vector e_item;
};

nlohmann::json to_json(const FusedRecord& r);
FusedRecord fused_from_json(const nlohmann::json& j);

}  // namespace hitlbm::fusion
