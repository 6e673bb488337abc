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

// Reference implementations and randomized check suites shared by the unit
// tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hitlbm/behavior.hpp"
#include "hitlbm/ctr.hpp"
#include "hitlbm/error.hpp"
#include "hitlbm/fusion.hpp"
#include "hitlbm/llm/backend.hpp"
#include "hitlbm/llm/prompts.hpp"
#include "hitlbm/metrics.hpp"
#include "hitlbm/rating.hpp"
#include "hitlbm/nn/gradcheck.hpp"
#include "hitlbm/nn/ops.hpp"
#include "hitlbm/rng.hpp"
#include "hitlbm/tree_search.hpp"

namespace hitlbm::testing {

using nn::Matrix;
using nn::Vector;

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline double weighted_sum(const Matrix& y, const Matrix& g) { return nn::sum(nn::hadamard(y, g)); }

// ---- brute-force AUC ------------------------------------------------------------

/// O(P*N) pair count with ties worth one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Random scores with frequent ties (drawn from a small grid) and labels
/// containing both classes.
inline std::pair<std::vector<double>, std::vector<double>> random_auc_case(Rng& rng) {
  const std::size_t n = 2 + rng.index(199);
  const std::size_t grid = 1 + rng.index(20);
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = static_cast<double>(rng.index(grid)) / static_cast<double>(grid);
    y[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
  }
  y[0] = 1.0;
  y[n - 1] = 0.0;
  return {s, y};
}

// ---- gradient checks -------------------------------------------------------------

inline Vector flatten(const std::vector<Matrix>& ms) {
  Vector out;
  for (const auto& m : ms) out.insert(out.end(), m.data().begin(), m.data().end());
  return out;
}

/// Finite-difference check of `loss` w.r.t. every entry of `inputs`.
inline double check_inputs(const std::vector<Matrix>& inputs,
                           const std::function<double(const std::vector<Matrix>&)>& loss,
                           const std::vector<Matrix>& analytic, double h = 1e-5) {
  const Vector x = flatten(inputs);
  const Vector a = flatten(analytic);
  if (a.size() != x.size()) throw DimensionError("analytic gradient size differs from input size");
  auto f = [&](std::span<const double> flat) {
    std::vector<Matrix> ms = inputs;
    std::size_t off = 0;
    for (auto& m : ms) {
      std::copy(flat.begin() + off, flat.begin() + off + m.size(), m.data().begin());
      off += m.size();
    }
    return loss(ms);
  };
  return nn::finite_diff_check(f, x, a, h);
}

inline double affine_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 1 + rng.index(4), k = 1 + rng.index(5), m = 1 + rng.index(5);
  const Matrix x = random_matrix(n, k, rng), w = random_matrix(k, m, rng), g = random_matrix(n, m, rng);
  const Matrix b = random_matrix(1, m, rng);
  const auto grads = nn::affine_backward(x, w, g);
  return check_inputs(
      {x, w, b},
      [&](const std::vector<Matrix>& v) { return weighted_sum(nn::affine(v[0], v[1], v[2].row(0)), g); },
      {grads.dx, grads.dw, Matrix::row_vector(grads.db)});
}

inline double attention_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t tq = 1 + rng.index(4), tk = 1 + rng.index(5), d = 1 + rng.index(8), dv = 1 + rng.index(6);
  const Matrix q = random_matrix(tq, d, rng), k = random_matrix(tk, d, rng), v = random_matrix(tk, dv, rng);
  const Matrix g = random_matrix(tq, dv, rng);
  const auto res = nn::attention(q, k, v);
  const auto grads = nn::attention_backward(res.cache, g);
  return check_inputs(
      {q, k, v}, [&](const std::vector<Matrix>& m) { return weighted_sum(nn::attention(m[0], m[1], m[2]).out, g); },
      {grads.dq, grads.dk, grads.dv});
}

/// Gradients of sum(G * MSA(R)) w.r.t. R, Wq, Wk, Wv, assembled from the
/// attention backward pass and the three projections.
inline double masked_self_attention_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t t = 1 + rng.index(6), d = 2 + rng.index(6);
  const Matrix r = random_matrix(t, d, rng), wq = random_matrix(d, d, rng), wk = random_matrix(d, d, rng),
               wv = random_matrix(d, d, rng), g = random_matrix(t, d, rng);
  const auto res = fusion::masked_self_attention(r, wq, wk, wv);
  const auto ag = nn::attention_backward(res.cache, g);
  const Matrix dr = nn::matmul_nt(ag.dq, wq) + nn::matmul_nt(ag.dk, wk) + nn::matmul_nt(ag.dv, wv);
  return check_inputs(
      {r, wq, wk, wv},
      [&](const std::vector<Matrix>& m) {
        return weighted_sum(fusion::masked_self_attention(m[0], m[1], m[2], m[3]).out, g);
      },
      {dr, nn::matmul_tn(r, ag.dq), nn::matmul_tn(r, ag.dk), nn::matmul_tn(r, ag.dv)});
}

/// Gradients of g . e_user for the item-query cross-attention w.r.t. the
/// chunk rows, the item vector and the three projections.
inline double cross_attention_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t t = 1 + rng.index(6), d = 2 + rng.index(6);
  const Matrix r = random_matrix(t, d, rng), item = random_matrix(1, d, rng), wq = random_matrix(d, d, rng),
               wk = random_matrix(d, d, rng), wv = random_matrix(d, d, rng), g = random_matrix(1, d, rng);
  const auto res = fusion::target_cross_attention(r, item.row(0), wq, wk, wv);
  const auto ag = nn::attention_backward(res.cache, g);
  const Matrix dr = nn::matmul_nt(ag.dk, wk) + nn::matmul_nt(ag.dv, wv);
  const Matrix ditem = nn::matmul_nt(ag.dq, wq);
  return check_inputs(
      {r, item, wq, wk, wv},
      [&](const std::vector<Matrix>& m) {
        const auto out = fusion::target_cross_attention(m[0], m[1].row(0), m[2], m[3], m[4]);
        return nn::dot(out.e_user, g.row(0));
      },
      {dr, ditem, nn::matmul_tn(item, ag.dq), nn::matmul_tn(r, ag.dk), nn::matmul_tn(r, ag.dv)});
}

inline double bce_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 1 + rng.index(10);
  Matrix p(1, n), z(1, n);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p(0, i) = rng.uniform(0.05, 0.95);
    z(0, i) = rng.uniform(-4.0, 4.0);
    y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  const double e1 = check_inputs(
      {p}, [&](const std::vector<Matrix>& m) { return nn::bce_loss(m[0].row(0), y).loss; },
      {Matrix::row_vector(nn::bce_loss(p.row(0), y).grad)});
  const double e2 = check_inputs(
      {z}, [&](const std::vector<Matrix>& m) { return nn::bce_with_logits(m[0].row(0), y).loss; },
      {Matrix::row_vector(nn::bce_with_logits(z.row(0), y).grad)});
  return std::max(e1, e2);
}

/// Largest change of any output row j < j' of the masked self-attention when
/// row j' of its input is perturbed, over every pair at sequence length t.
inline double causality_violation(std::uint64_t seed, std::size_t t = 8, std::size_t d = 6) {
  Rng rng(seed);
  const Matrix r = random_matrix(t, d, rng), wq = random_matrix(d, d, rng), wk = random_matrix(d, d, rng),
               wv = random_matrix(d, d, rng);
  const Matrix base = fusion::masked_self_attention(r, wq, wk, wv).out;
  double worst = 0.0;
  for (std::size_t jp = 0; jp < t; ++jp) {
    Matrix bumped = r;
    for (std::size_t c = 0; c < d; ++c) bumped(jp, c) += rng.uniform(-5.0, 5.0);
    const Matrix out = fusion::masked_self_attention(bumped, wq, wk, wv).out;
    for (std::size_t j = 0; j < jp; ++j) {
      for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(out(j, c) - base(j, c)));
    }
  }
  return worst;
}

/// A tiny joint fusion + CTR problem: a few users with interest sequences,
/// a few items with knowledge vectors and labelled samples.
struct JointFixture {
  std::vector<ctr::CtrSample> samples;
  ctr::SideInputs side;
  ctr::JointModel joint;
};

inline JointFixture make_joint_fixture(std::uint64_t seed, fusion::Variant variant = fusion::Variant::tif,
                                       fusion::CrossMode mode = fusion::CrossMode::item_query) {
  Rng rng(seed);
  const std::size_t d = 4 + rng.index(3);
  JointFixture fx;
  const std::vector<std::string> users{"u0", "u1"};
  const std::vector<std::string> items{"i0", "i1", "i2", "i3"};
  for (const auto& u : users) {
    const std::size_t t = 1 + rng.index(4);
    ctr::UserInterests ui{random_matrix(t, d, rng), Vector(t)};
    for (double& s : ui.scores) s = rng.uniform(0.1, 1.0);
    fx.side.users[u] = ui;
  }
  for (const auto& i : items) fx.side.items[i] = random_vector(d, rng);
  for (std::size_t k = 0; k < 6; ++k) {
    ctr::CtrSample s;
    s.user_id = users[k % users.size()];
    s.item_id = items[rng.index(items.size())];
    s.recent_item_ids = {items[rng.index(items.size())], items[rng.index(items.size())]};
    s.label = static_cast<int>(k % 2);
    fx.samples.push_back(s);
  }
  ctr::CtrConfig cfg;
  cfg.d_id = 3;
  cfg.side_dim = d;
  cfg.use_e_user = true;
  cfg.use_e_item = true;
  cfg.hidden = {5, 4};
  fx.joint = ctr::JointModel{ctr::CtrModel(cfg, fx.samples), fusion::FusionModel({d, variant, mode})};
  fx.joint.ctr.init(rng);
  fx.joint.fusion.init(fx.joint.ctr.params(), rng);
  // Random embeddings and biases keep every ReLU input away from its kink.
  for (auto& [name, p] : fx.joint.ctr.params().items()) {
    if (name.rfind("ctr/user_emb", 0) == 0 || name.rfind("ctr/item_emb", 0) == 0 ||
        name.find("/b") != std::string::npos) {
      for (double& x : p.value.data()) x = rng.uniform(-1.0, 1.0);
    }
  }
  return fx;
}

/// Finite-difference check of every CTR and fusion parameter through the
/// full per-user loss (summed over users).
inline double composite_check(std::uint64_t seed, fusion::Variant variant = fusion::Variant::tif,
                              fusion::CrossMode mode = fusion::CrossMode::item_query) {
  auto fx = make_joint_fixture(seed, variant, mode);
  std::map<std::string, std::vector<ctr::CtrSample>> by_user;
  for (const auto& s : fx.samples) by_user[s.user_id].push_back(s);
  auto loss = [&](bool grad) {
    double total = 0.0;
    for (const auto& [u, batch] : by_user) total += ctr::joint_batch_loss(fx.joint, fx.side, u, batch, grad);
    return total;
  };
  return nn::check_param_gradients(fx.joint.ctr.params(), loss, 1e-5);
}

// ---- rater trainability ------------------------------------------------------------

/// Two Gaussian clusters on either side of a random hyperplane, in the
/// rater's feature layout (d encoder dims plus the position channel).
inline std::pair<Matrix, Vector> separable_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const Vector dir = random_vector(d, rng);
  Matrix x(n, d + 1);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2 == 0 ? 1.0 : 0.0;
    const double side = y[i] == 1.0 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < d; ++c) x(i, c) = 0.3 * rng.normal() + 0.5 * side * dir[c];
    x(i, d) = 1.0;
  }
  return {x, y};
}

/// Training AUC of a rater fit with full-batch updates on separable data.
inline double separable_training_auc(rating::RaterKind kind, std::uint64_t seed, std::size_t epochs = 200) {
  const std::size_t d = 16;
  const auto [x, y] = separable_features(500, d, seed);
  rating::RatingHyper hyper;
  hyper.epochs = epochs;
  hyper.batch = 0;
  hyper.seed = seed;
  const auto model = rating::train_on_features(kind, d, 1, x, y, hyper);
  return metrics::auc(rating::predict_all(model, x), y);
}

// ---- scripted search scorer --------------------------------------------------------

/// Scores looked up by (layer, child_index).
class ScriptedScorer final : public search::InterestScorer {
 public:
  ScriptedScorer(std::vector<std::vector<double>> cont, std::vector<std::vector<double>> eff)
      : cont_(std::move(cont)), eff_(std::move(eff)) {}
  double continuity(const search::ScoreQuery& q) const override { return cont_.at(q.layer - 1).at(q.child_index); }
  double effectiveness(const search::ScoreQuery& q) const override { return eff_.at(q.layer - 1).at(q.child_index); }

 private:
  std::vector<std::vector<double>> cont_;
  std::vector<std::vector<double>> eff_;
};

/// Scores derived from a hash of the candidate's position, which makes the
/// search pick a uniformly random child at every layer.
class RandomScorer final : public search::InterestScorer {
 public:
  RandomScorer(std::uint64_t seed, std::string user) : seed_(seed), user_(std::move(user)) {}
  double continuity(const search::ScoreQuery&) const override { return 0.0; }
  double effectiveness(const search::ScoreQuery& q) const override {
    const std::uint64_t h = mix_seed(mix_seed(seed_, fnv1a64(user_)), q.layer * 1000 + q.child_index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_;
  std::string user_;
};

inline behavior::Interaction make_item(const std::string& user, const std::string& id, const std::string& title,
                                       std::size_t category, int label, std::int64_t ts) {
  behavior::Interaction x;
  x.user_id = user;
  x.item_id = id;
  x.title = title;
  x.attrs["category"] = "cat_" + std::string(category < 10 ? "0" : "") + std::to_string(category);
  x.rating = label ? 5.0 : 1.0;
  x.label = label;
  x.ts = ts;
  return x;
}

/// A user with `depth` chunks of three events each.
inline behavior::ChunkSequence small_sequence(const std::string& user, std::size_t depth, Rng& rng) {
  behavior::ChunkSequence seq{user, {}};
  std::int64_t ts = 0;
  for (std::size_t c = 1; c <= depth; ++c) {
    behavior::BehaviorChunk chunk{user, c, {}};
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string id = "it" + std::to_string(c) + "_" + std::to_string(k);
      chunk.items.push_back(make_item(user, id, "Title " + id, rng.index(10), static_cast<int>(rng.index(2)), ts++));
    }
    seq.chunks.push_back(chunk);
  }
  return seq;
}

/// One randomly scripted search instance (depth <= 6, branching <= 5, scores
/// on a coarse grid so ties are common). Returns whether run_search picks the
/// same child as the layer-wise oracle at every layer.
inline bool scripted_search_agrees(std::uint64_t seed, llm::Gateway& gateway) {
  Rng rng(seed);
  const std::size_t depth = 1 + rng.index(6);
  const std::size_t branching = 1 + rng.index(5);
  const double alphas[] = {0.0, 0.5, 1.0, rng.uniform()};
  search::SearchConfig cfg;
  cfg.n_expand = branching;
  cfg.alpha = alphas[rng.index(4)];
  cfg.seed = seed;
  std::vector<std::vector<double>> cont(depth, std::vector<double>(branching));
  std::vector<std::vector<double>> eff = cont;
  std::vector<std::vector<double>> oracle = cont;
  for (std::size_t l = 0; l < depth; ++l) {
    for (std::size_t k = 0; k < branching; ++k) {
      cont[l][k] = static_cast<double>(rng.index(3)) / 2.0;
      eff[l][k] = static_cast<double>(rng.index(3)) / 2.0;
      oracle[l][k] = l == 0 ? eff[l][k] : cfg.alpha * cont[l][k] + (1.0 - cfg.alpha) * eff[l][k];
    }
  }
  const auto user = small_sequence("s" + std::to_string(seed), depth, rng);
  const ScriptedScorer scorer(cont, eff);
  const auto result = search::run_search(user, cfg, gateway, scorer);
  return search::path_child_indices(result) == search::greedy_oracle(oracle);
}

// ---- scripted probability backend ----------------------------------------------------

/// Yes-probabilities chosen per prompt variant so that, on an eval set of
/// items titled pos_<i> / neg_<j> (10 of each), the variant's AUC equals a
/// target that is a multiple of 0.1: positives score 0.5 and the first
/// (1 - auc) * 10 negatives score above them.
class ScriptedAucBackend final : public llm::Backend {
 public:
  ScriptedAucBackend(double seq, double point, double hist) : auc_{{"seq", seq}, {"point", point}, {"hist", hist}} {}
  std::string id() const override { return "scripted-auc"; }
  std::vector<std::string> generate(const llm::GenRequest& req) override {
    return std::vector<std::string>(req.n, "likes cat_01");
  }
  double yes_probability(const std::string& prompt) override {
    const auto kind = llm::prompt_kind_of(prompt);
    if (!kind) throw ProtocolError("scripted backend: unknown prompt");
    const auto target = llm::prompt_section(prompt, llm::section::kTargetItem);
    if (!target) throw ProtocolError("scripted backend: no target item");
    const std::string body(*target);
    if (body.find("pos_") != std::string::npos) return 0.5;
    const auto at = body.find("neg_");
    if (at == std::string::npos) throw ProtocolError("scripted backend: unexpected item");
    const int j = std::stoi(body.substr(at + 4));
    const int above = static_cast<int>(std::lround((1.0 - auc_.at(std::string(llm::to_string(*kind)))) * 10.0));
    return j < above ? 0.9 : 0.1;
  }

 private:
  std::map<std::string, double> auc_;
};

/// Two-chunk cascade whose second chunk holds 10 positives and 10 negatives.
inline rating::CascadeUser scripted_cascade_user() {
  rating::CascadeUser user{"u", {}};
  behavior::BehaviorChunk c1{"u", 1, {}};
  behavior::BehaviorChunk c2{"u", 2, {}};
  std::int64_t ts = 0;
  for (int i = 0; i < 4; ++i) c1.items.push_back(make_item("u", "a" + std::to_string(i), "old_" + std::to_string(i), 1, i % 2, ts++));
  for (int i = 0; i < 10; ++i) {
    c2.items.push_back(make_item("u", "p" + std::to_string(i), "pos_" + std::to_string(i), 2, 1, ts++));
    c2.items.push_back(make_item("u", "n" + std::to_string(i), "neg_" + std::to_string(i), 3, 0, ts++));
  }
  user.steps.push_back({c1, "likes cat_01"});
  user.steps.push_back({c2, "likes cat_02"});
  return user;
}

}  // namespace hitlbm::testing
