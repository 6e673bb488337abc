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

#include "hitlbm/rating.hpp"

#include <algorithm>

#include "hitlbm/error.hpp"
#include "hitlbm/metrics.hpp"
#include "hitlbm/nn/ops.hpp"
#include "hitlbm/parallel.hpp"
#include "hitlbm/rng.hpp"

namespace hitlbm::rating {

using nlohmann::json;

std::optional<EvalSet> build_eval_set(const behavior::BehaviorChunk& next_chunk, std::size_t n, std::uint64_t seed) {
  if (next_chunk.items.empty()) throw PreconditionError("build_eval_set: successor chunk is empty");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < next_chunk.items.size(); ++i) {
    (next_chunk.items[i].label == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) return std::nullopt;

  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  const std::size_t m = std::min({n, pos.size(), neg.size()});
  EvalSet set;
  set.chunk_index = next_chunk.index > 0 ? next_chunk.index - 1 : 0;
  set.n = n;
  for (std::size_t i = 0; i < m; ++i) set.samples.push_back({next_chunk.items[pos[i]], 1});
  for (std::size_t i = 0; i < m; ++i) set.samples.push_back({next_chunk.items[neg[i]], 0});
  return set;
}

double variant_auc(llm::PromptKind variant, const llm::PromptContext& ctx, const EvalSet& eval, llm::Gateway& gateway,
                   const llm::PromptOptions& opts) {
  if (variant != llm::PromptKind::seq && variant != llm::PromptKind::point && variant != llm::PromptKind::hist) {
    throw PreconditionError("variant_auc: variant must be seq, point or hist");
  }
  std::vector<double> scores;
  std::vector<double> labels;
  llm::PromptContext probe = ctx;
  for (const auto& s : eval.samples) {
    probe.item = &s.item;
    scores.push_back(gateway.yes_probability(llm::render_prompt(variant, probe, opts)));
    labels.push_back(static_cast<double>(s.label));
  }
  return metrics::auc(scores, labels);
}

int continuity_label(const AucDiagnostics& auc) { return auc.point > auc.seq ? 1 : 0; }
int effectiveness_label(const AucDiagnostics& auc) { return auc.point > auc.hist ? 1 : 0; }

json to_json(const RatingExample& ex) {
  return json{{"kind", ex.kind == ExampleKind::cont ? "cont" : "eff"},
              {"user_id", ex.user_id},
              {"chunk_index", ex.chunk_index},
              {"prev_texts", ex.prev_texts},
              {"current_text", ex.current_text},
              {"label", ex.label},
              {"auc_seq", ex.diagnostics.seq},
              {"auc_point", ex.diagnostics.point},
              {"auc_hist", ex.diagnostics.hist}};
}

RatingExample rating_example_from_json(const json& j) {
  RatingExample ex;
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "cont" && kind != "eff") throw ParseError("rating example kind '" + kind + "'", 0);
  ex.kind = kind == "cont" ? ExampleKind::cont : ExampleKind::eff;
  ex.user_id = j.at("user_id").get<std::string>();
  ex.chunk_index = j.at("chunk_index").get<std::size_t>();
  ex.prev_texts = j.at("prev_texts").get<std::vector<std::string>>();
  ex.current_text = j.at("current_text").get<std::string>();
  ex.label = j.at("label").get<int>();
  ex.diagnostics = {j.at("auc_seq").get<double>(), j.at("auc_point").get<double>(), j.at("auc_hist").get<double>()};
  return ex;
}

RatingDatasets build_user_rating_data(const CascadeUser& user, const RatingDataOptions& opts, llm::Gateway& gateway) {
  RatingDatasets out;
  llm::PromptOptions popts = opts.prompt;
  popts.max_prev_interests = opts.k_prev;
  for (std::size_t t = 0; t + 1 < user.steps.size(); ++t) {
    const auto& step = user.steps[t];
    const std::uint64_t seed = mix_seed(mix_seed(opts.seed, fnv1a64(user.user_id)), step.chunk.index);
    auto eval = build_eval_set(user.steps[t + 1].chunk, opts.n_eval, seed);
    if (!eval) {
      ++out.skipped_chunks;
      continue;
    }
    eval->chunk_index = step.chunk.index;

    std::vector<std::string> prev;
    for (std::size_t j = t > opts.k_prev ? t - opts.k_prev : 0; j < t; ++j) prev.push_back(user.steps[j].interest);

    llm::PromptContext seq_ctx;
    seq_ctx.prev_interests = prev;
    llm::PromptContext point_ctx;
    point_ctx.current_interest = step.interest;
    llm::PromptContext hist_ctx;
    hist_ctx.chunk = &step.chunk;

    AucDiagnostics auc;
    auc.seq = variant_auc(llm::PromptKind::seq, seq_ctx, *eval, gateway, popts);
    auc.point = variant_auc(llm::PromptKind::point, point_ctx, *eval, gateway, popts);
    auc.hist = variant_auc(llm::PromptKind::hist, hist_ctx, *eval, gateway, popts);

    RatingExample cont{ExampleKind::cont, user.user_id, step.chunk.index, prev, step.interest,
                       continuity_label(auc), auc};
    RatingExample eff{ExampleKind::eff, user.user_id, step.chunk.index, {}, step.interest,
                      effectiveness_label(auc), auc};
    out.cont.push_back(std::move(cont));
    out.eff.push_back(std::move(eff));
  }
  return out;
}

RatingDatasets build_rating_datasets(const std::vector<CascadeUser>& users, const RatingDataOptions& opts,
                                     llm::Gateway& gateway, std::size_t workers) {
  std::vector<RatingDatasets> per_user(users.size());
  parallel_for(users.size(), workers,
               [&](std::size_t i) { per_user[i] = build_user_rating_data(users[i], opts, gateway); });
  RatingDatasets all;
  for (auto& d : per_user) {
    std::move(d.cont.begin(), d.cont.end(), std::back_inserter(all.cont));
    std::move(d.eff.begin(), d.eff.end(), std::back_inserter(all.eff));
    all.skipped_chunks += d.skipped_chunks;
  }
  return all;
}

std::string_view to_string(RaterKind kind) { return kind == RaterKind::srm ? "SRM" : "PRM"; }

RatingModel::RatingModel(RaterKind kind, std::size_t encoder_dim, std::size_t k_prev, std::vector<std::size_t> hidden)
    : kind_(kind),
      encoder_dim_(encoder_dim),
      k_prev_(k_prev),
      mlp_(kind == RaterKind::srm ? "srm" : "prm", encoder_dim + 1, std::move(hidden)) {}

nn::Vector RatingModel::features(const std::vector<std::string>& prev_texts, const std::string& current,
                                 const encoder::TextEncoder& enc) const {
  if (enc.dim() != encoder_dim_) {
    throw DimensionError("rating model expects encoder dimension " + std::to_string(encoder_dim_) + ", got " +
                         std::to_string(enc.dim()));
  }
  std::vector<const std::string*> texts;
  if (kind_ == RaterKind::srm) {
    const std::size_t first = prev_texts.size() > k_prev_ ? prev_texts.size() - k_prev_ : 0;
    for (std::size_t i = first; i < prev_texts.size(); ++i) texts.push_back(&prev_texts[i]);
  }
  texts.push_back(&current);

  const double n = static_cast<double>(texts.size());
  nn::Vector f(encoder_dim_ + 1, 0.0);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const nn::Vector e = enc.encode(*texts[i]);
    for (std::size_t c = 0; c < encoder_dim_; ++c) f[c] += e[c] / n;
    f[encoder_dim_] += (static_cast<double>(i + 1) / n) / n;
  }
  return f;
}

double RatingModel::score_features(std::span<const double> features) const {
  const nn::Matrix x = nn::Matrix::row_vector(features);
  return nn::sigmoid(mlp_.forward(params_, x).front());
}

double RatingModel::score(const std::vector<std::string>& prev_texts, const std::string& current,
                          const encoder::TextEncoder& enc) const {
  return score_features(features(prev_texts, current, enc));
}

json RatingModel::to_json() const {
  return json{{"config",
               {{"kind", to_string(kind_)},
                {"encoder_dim", encoder_dim_},
                {"k_prev", k_prev_},
                {"hidden", mlp_.hidden()}}},
              {"params", params_.to_json()}};
}

RatingModel RatingModel::from_json(const json& j) {
  const auto& cfg = j.at("config");
  const auto kind = cfg.at("kind").get<std::string>();
  if (kind != "SRM" && kind != "PRM") throw ParseError("rating model kind '" + kind + "'", 0);
  RatingModel m(kind == "SRM" ? RaterKind::srm : RaterKind::prm, cfg.at("encoder_dim").get<std::size_t>(),
                cfg.at("k_prev").get<std::size_t>(), cfg.at("hidden").get<std::vector<std::size_t>>());
  Rng rng(0);
  m.mlp_.init(m.params_, rng);
  m.params_.load_json(j.at("params"));
  return m;
}

namespace {

double full_loss(const RatingModel& model, const nn::Matrix& x, std::span<const double> labels) {
  const nn::Vector logits = model.mlp().forward(model.params(), x);
  return nn::bce_with_logits(logits, labels).loss;
}

nn::Matrix gather_rows(const nn::Matrix& x, std::span<const std::size_t> rows) {
  nn::Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace

RatingModel train_on_features(RaterKind kind, std::size_t encoder_dim, std::size_t k_prev, const nn::Matrix& x,
                              std::span<const double> labels, const RatingHyper& hyper, TrainReport* report) {
  if (x.rows() != labels.size()) throw DimensionError("train_on_features: rows and labels differ");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](double y) { return y > 0.5; });
  if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
    throw TrainingError(std::string(to_string(kind)) + " training data has a single class (" +
                        std::to_string(positives) + " positives of " + std::to_string(labels.size()) + ")");
  }
  RatingModel model(kind, encoder_dim, k_prev, hyper.hidden);
  Rng rng(hyper.seed);
  model.mlp().init(model.params(), rng);
  nn::Adam opt({hyper.lr});

  const std::size_t n = x.rows();
  const std::size_t batch = hyper.batch == 0 || hyper.batch >= n ? n : hyper.batch;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (batch == n) {
      nn::Mlp::Cache cache;
      const nn::Vector logits = model.mlp().forward(model.params(), x, &cache);
      const nn::LossResult loss = nn::bce_with_logits(logits, labels);
      if (report) report->epoch_loss.push_back(loss.loss);
      model.params().zero_grad();
      model.mlp().backward(model.params(), cache, loss.grad);
      opt.step(model.params());
      continue;
    }
    if (report) report->epoch_loss.push_back(full_loss(model, x, labels));
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      const nn::Matrix xb = gather_rows(x, rows);
      std::vector<double> yb;
      for (std::size_t r : rows) yb.push_back(labels[r]);
      nn::Mlp::Cache cache;
      const nn::Vector logits = model.mlp().forward(model.params(), xb, &cache);
      const nn::LossResult loss = nn::bce_with_logits(logits, yb);
      model.params().zero_grad();
      model.mlp().backward(model.params(), cache, loss.grad);
      opt.step(model.params());
    }
  }
  if (report) report->final_loss = full_loss(model, x, labels);
  return model;
}

RatingModel train_rating_model(RaterKind kind, const std::vector<RatingExample>& data, const encoder::TextEncoder& enc,
                               std::size_t k_prev, const RatingHyper& hyper, TrainReport* report) {
  RatingModel shape(kind, enc.dim(), k_prev, hyper.hidden);
  nn::Matrix x(data.size(), enc.dim() + 1);
  std::vector<double> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const nn::Vector f = shape.features(data[i].prev_texts, data[i].current_text, enc);
    std::copy(f.begin(), f.end(), x.row(i).begin());
    labels.push_back(static_cast<double>(data[i].label));
  }
  return train_on_features(kind, enc.dim(), k_prev, x, labels, hyper, report);
}

std::vector<double> predict_all(const RatingModel& model, const nn::Matrix& x) {
  nn::Vector logits = model.mlp().forward(model.params(), x);
  for (double& z : logits) z = nn::sigmoid(z);
  return logits;
}

}  // namespace hitlbm::rating
