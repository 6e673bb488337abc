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

#include "hitlbm/fusion.hpp"

#include <cmath>

#include "hitlbm/error.hpp"
#include "hitlbm/llm/prompts.hpp"

namespace hitlbm::fusion {

using nlohmann::json;

namespace {

const std::string kSaWq = "fusion/sa_wq";
const std::string kSaWk = "fusion/sa_wk";
const std::string kSaWv = "fusion/sa_wv";
const std::string kCaWq = "fusion/ca_wq";
const std::string kCaWk = "fusion/ca_wk";
const std::string kCaWv = "fusion/ca_wv";
const std::string kMlpW = "fusion/mlp_w";
const std::string kMlpB = "fusion/mlp_b";

Vector mean_rows(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
  for (double& x : out) x /= static_cast<double>(m.rows());
  return out;
}

/// Every row equal to g / rows: the gradient of a row mean.
Matrix spread_rows(std::span<const double> g, std::size_t rows) {
  Matrix out(rows, g.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < g.size(); ++c) out(r, c) = g[c] / static_cast<double>(rows);
  return out;
}

void add_outer(Matrix& acc, std::span<const double> a, const Matrix& b_row) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    auto row = acc.row(i);
    for (std::size_t j = 0; j < b_row.cols(); ++j) row[j] += a[i] * b_row(0, j);
  }
}

void add_into(Vector& acc, std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
}

void self_attention_backward(nn::ParamStore& store, const Matrix& r, const nn::AttentionCache& cache,
                             const Matrix& d_out) {
  const auto g = nn::attention_backward(cache, d_out);
  store.grad(kSaWq) += nn::matmul_tn(r, g.dq);
  store.grad(kSaWk) += nn::matmul_tn(r, g.dk);
  store.grad(kSaWv) += nn::matmul_tn(r, g.dv);
}

}  // namespace

Matrix encode_interests(const std::vector<std::string>& interests, const encoder::TextEncoder& enc, std::size_t d) {
  if (interests.empty()) throw PreconditionError("encode_interests: no interests");
  if (enc.dim() != d) {
    throw DimensionError("encoder " + enc.id() + " has dimension " + std::to_string(enc.dim()) + ", fusion expects " +
                         std::to_string(d));
  }
  Matrix e(interests.size(), d);
  for (std::size_t j = 0; j < interests.size(); ++j) {
    const Vector v = enc.encode(interests[j]);
    if (v.size() != d) throw DimensionError("encoder returned " + std::to_string(v.size()) + " values, expected " + std::to_string(d));
    std::copy(v.begin(), v.end(), e.row(j).begin());
  }
  return e;
}

Matrix sinusoidal_positions(std::size_t t, std::size_t d) {
  Matrix pos(t, d);
  for (std::size_t j = 0; j < t; ++j) {
    for (std::size_t c = 0; c < d; c += 2) {
      const double angle = static_cast<double>(j) / std::pow(10000.0, static_cast<double>(c) / static_cast<double>(d));
      pos(j, c) = std::sin(angle);
      if (c + 1 < d) pos(j, c + 1) = std::cos(angle);
    }
  }
  return pos;
}

Matrix weight_and_position(const Matrix& e, std::span<const double> scores) {
  return weight_and_position(e, scores, sinusoidal_positions(e.rows(), e.cols()));
}

Matrix weight_and_position(const Matrix& e, std::span<const double> scores, const Matrix& positions) {
  if (scores.size() != e.rows()) {
    throw DimensionError("weight_and_position: " + std::to_string(scores.size()) + " scores for " + e.shape_str());
  }
  nn::require_shape(positions.same_shape(e), "weight_and_position", e, positions);
  Matrix r(e.rows(), e.cols());
  for (std::size_t j = 0; j < e.rows(); ++j) {
    const double s = scores[j];
    if (!(s >= 0.0 && s <= 1.0)) throw PreconditionError("weight_and_position: score " + std::to_string(s) + " outside [0, 1]");
    for (std::size_t c = 0; c < e.cols(); ++c) r(j, c) = e(j, c) * s + positions(j, c);
  }
  return r;
}

SelfAttentionResult masked_self_attention(const Matrix& r, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  if (r.rows() == 0) throw PreconditionError("masked_self_attention: empty sequence");
  const Matrix mask = nn::causal_mask(r.rows());
  auto res = nn::attention(nn::matmul(r, wq), nn::matmul(r, wk), nn::matmul(r, wv), &mask);
  return {std::move(res.out), std::move(res.cache)};
}

std::string_view to_string(CrossMode mode) { return mode == CrossMode::item_query ? "item_query" : "literal"; }

CrossMode parse_cross_mode(std::string_view text) {
  if (text == "item_query") return CrossMode::item_query;
  if (text == "literal") return CrossMode::literal;
  throw ConfigError("unknown cross-attention mode '" + std::string(text) + "' (expected item_query or literal)");
}

CrossAttentionResult target_cross_attention(const Matrix& r_star, std::span<const double> e_item, const Matrix& wq,
                                            const Matrix& wk, const Matrix& wv, CrossMode mode) {
  if (r_star.rows() == 0) throw PreconditionError("target_cross_attention: no interests to fuse");
  const Matrix item = Matrix::row_vector(e_item);
  CrossAttentionResult out;
  if (mode == CrossMode::item_query) {
    auto res = nn::attention(nn::matmul(item, wq), nn::matmul(r_star, wk), nn::matmul(r_star, wv));
    out.e_user.assign(res.out.row(0).begin(), res.out.row(0).end());
    out.weights.assign(res.cache.probs.row(0).begin(), res.cache.probs.row(0).end());
    out.cache = std::move(res.cache);
  } else {
    auto res = nn::attention(nn::matmul(r_star, wq), nn::matmul(item, wk), nn::matmul(item, wv));
    out.e_user = mean_rows(res.out);
    out.weights.assign(r_star.rows(), 1.0);
    out.cache = std::move(res.cache);
  }
  return out;
}

Vector item_knowledge_vector(const behavior::Interaction& item, llm::Gateway& gateway, const encoder::TextEncoder& enc,
                             std::uint64_t seed) {
  if (item.title.empty()) throw PreconditionError("item " + item.item_id + " has no title");
  llm::PromptContext ctx;
  ctx.item = &item;
  llm::GenRequest req;
  req.kind = llm::PromptKind::item;
  req.rendered = llm::render_prompt(llm::PromptKind::item, ctx);
  req.n = 1;
  req.seed = seed;
  return enc.encode(gateway.sample_candidates(req).front());
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::mean_pool:
      return "mean_pool";
    case Variant::mlp:
      return "mlp";
    case Variant::self_attention:
      return "self_attention";
    case Variant::tif:
      return "tif";
  }
  return "tif";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : {Variant::mean_pool, Variant::mlp, Variant::self_attention, Variant::tif}) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown fusion variant '" + std::string(text) + "' (expected mean_pool, mlp, self_attention or tif)");
}

FusionModel::FusionModel(FusionConfig cfg) : cfg_(cfg) {
  if (cfg_.d == 0) throw ConfigError("fusion dimension must be >= 1");
}

void FusionModel::init(nn::ParamStore& store, Rng& rng) const {
  const std::size_t d = cfg_.d;
  switch (cfg_.variant) {
    case Variant::mean_pool:
      return;
    case Variant::mlp:
      store.add(kMlpW, nn::glorot(d, d, rng));
      store.add(kMlpB, Matrix(1, d));
      return;
    case Variant::self_attention:
      for (const auto* name : {&kSaWq, &kSaWk, &kSaWv}) store.add(*name, nn::glorot(d, d, rng));
      return;
    case Variant::tif:
      for (const auto* name : {&kSaWq, &kSaWk, &kSaWv, &kCaWq, &kCaWk, &kCaWv}) store.add(*name, nn::glorot(d, d, rng));
      return;
  }
}

FusionModel::UserState FusionModel::prepare(const nn::ParamStore& store, const Matrix& e,
                                            std::span<const double> scores) const {
  if (e.rows() == 0) throw PreconditionError("fusion: user has no interests");
  if (e.cols() != cfg_.d) throw DimensionError("fusion: interest matrix " + e.shape_str() + " vs d=" + std::to_string(cfg_.d));
  UserState s;
  s.e = e;
  switch (cfg_.variant) {
    case Variant::mean_pool:
      s.pooled = mean_rows(e);
      break;
    case Variant::mlp: {
      const Vector m = mean_rows(e);
      s.pre = nn::affine(Matrix::row_vector(m), store.value(kMlpW), store.value(kMlpB).row(0));
      const Matrix h = nn::relu(s.pre);
      s.pooled.assign(h.row(0).begin(), h.row(0).end());
      break;
    }
    case Variant::self_attention: {
      s.r = e;
      auto sa = masked_self_attention(s.r, store.value(kSaWq), store.value(kSaWk), store.value(kSaWv));
      s.r_star = std::move(sa.out);
      s.sa = std::move(sa.cache);
      s.pooled = mean_rows(s.r_star);
      break;
    }
    case Variant::tif: {
      s.r = weight_and_position(e, scores);
      auto sa = masked_self_attention(s.r, store.value(kSaWq), store.value(kSaWk), store.value(kSaWv));
      s.r_star = std::move(sa.out);
      s.sa = std::move(sa.cache);
      if (cfg_.mode == CrossMode::item_query) {
        s.proj_a = nn::matmul(s.r_star, store.value(kCaWk));
        s.proj_b = nn::matmul(s.r_star, store.value(kCaWv));
      } else {
        s.proj_a = nn::matmul(s.r_star, store.value(kCaWq));
      }
      break;
    }
  }
  return s;
}

Vector FusionModel::user_vector(const nn::ParamStore& store, const UserState& state, std::span<const double> e_item,
                                ItemCache* cache) const {
  if (item_independent()) return state.pooled;
  if (e_item.size() != cfg_.d) throw DimensionError("fusion: item vector has " + std::to_string(e_item.size()) + " values");
  const Matrix item = Matrix::row_vector(e_item);
  Vector out;
  if (cfg_.mode == CrossMode::item_query) {
    auto res = nn::attention(nn::matmul(item, store.value(kCaWq)), state.proj_a, state.proj_b);
    out.assign(res.out.row(0).begin(), res.out.row(0).end());
    if (cache) cache->attn = std::move(res.cache);
  } else {
    auto res = nn::attention(state.proj_a, nn::matmul(item, store.value(kCaWk)), nn::matmul(item, store.value(kCaWv)));
    out = mean_rows(res.out);
    if (cache) cache->attn = std::move(res.cache);
  }
  return out;
}

FusionModel::UserGrad FusionModel::make_grad(const UserState& state) const {
  UserGrad g;
  g.d_pooled.assign(cfg_.d, 0.0);
  if (cfg_.variant == Variant::tif) {
    g.d_proj_a = Matrix(state.proj_a.rows(), state.proj_a.cols());
    if (cfg_.mode == CrossMode::item_query) g.d_proj_b = Matrix(state.proj_b.rows(), state.proj_b.cols());
  }
  return g;
}

void FusionModel::item_backward(nn::ParamStore& store, const UserState& state, std::span<const double> e_item,
                                const ItemCache& cache, std::span<const double> d_user, UserGrad& acc) const {
  if (item_independent()) {
    add_into(acc.d_pooled, d_user);
    return;
  }
  if (cfg_.mode == CrossMode::item_query) {
    const auto g = nn::attention_backward(cache.attn, Matrix::row_vector(d_user));
    add_outer(store.grad(kCaWq), e_item, g.dq);
    acc.d_proj_a += g.dk;
    acc.d_proj_b += g.dv;
  } else {
    const auto g = nn::attention_backward(cache.attn, spread_rows(d_user, state.proj_a.rows()));
    acc.d_proj_a += g.dq;
    add_outer(store.grad(kCaWk), e_item, g.dk);
    add_outer(store.grad(kCaWv), e_item, g.dv);
  }
}

void FusionModel::user_backward(nn::ParamStore& store, const UserState& state, const UserGrad& acc) const {
  switch (cfg_.variant) {
    case Variant::mean_pool:
      return;
    case Variant::mlp: {
      const Matrix dpre = nn::relu_backward(state.pre, Matrix::row_vector(acc.d_pooled));
      const auto g = nn::affine_backward(Matrix::row_vector(mean_rows(state.e)), store.value(kMlpW), dpre);
      store.grad(kMlpW) += g.dw;
      store.grad(kMlpB) += Matrix::row_vector(g.db);
      return;
    }
    case Variant::self_attention:
      self_attention_backward(store, state.r, state.sa, spread_rows(acc.d_pooled, state.r_star.rows()));
      return;
    case Variant::tif: {
      Matrix d_r_star;
      if (cfg_.mode == CrossMode::item_query) {
        store.grad(kCaWk) += nn::matmul_tn(state.r_star, acc.d_proj_a);
        store.grad(kCaWv) += nn::matmul_tn(state.r_star, acc.d_proj_b);
        d_r_star = nn::matmul_nt(acc.d_proj_a, store.value(kCaWk)) + nn::matmul_nt(acc.d_proj_b, store.value(kCaWv));
      } else {
        store.grad(kCaWq) += nn::matmul_tn(state.r_star, acc.d_proj_a);
        d_r_star = nn::matmul_nt(acc.d_proj_a, store.value(kCaWq));
      }
      self_attention_backward(store, state.r, state.sa, d_r_star);
      return;
    }
  }
}

json FusionModel::config_json() const {
  return json{{"d", cfg_.d}, {"variant", to_string(cfg_.variant)}, {"cross_mode", to_string(cfg_.mode)}};
}

FusionConfig FusionModel::config_from_json(const json& j) {
  FusionConfig cfg;
  cfg.d = j.at("d").get<std::size_t>();
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.mode = parse_cross_mode(j.at("cross_mode").get<std::string>());
  return cfg;
}

json to_json(const FusedRecord& r) {
  return json{{"user_id", r.user_id}, {"item_id", r.item_id}, {"e_user", r.e_user}, {"e_item", r.e_item}};
}

FusedRecord fused_from_json(const json& j) {
  return {j.at("user_id").get<std::string>(), j.at("item_id").get<std::string>(), j.at("e_user").get<Vector>(),
          j.at("e_item").get<Vector>()};
}

}  // namespace hitlbm::fusion
