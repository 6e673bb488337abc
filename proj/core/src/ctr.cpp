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

#include "hitlbm/ctr.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <tuple>

#include "hitlbm/error.hpp"
#include "hitlbm/metrics.hpp"
#include "hitlbm/nn/ops.hpp"

namespace hitlbm::ctr {

using nlohmann::json;

namespace {

const std::string kUserEmb = "ctr/user_emb";
const std::string kItemEmb = "ctr/item_emb";
constexpr double kEmbeddingStd = 0.1;

void require_both_classes(std::span<const CtrSample> samples, const char* what) {
  std::size_t pos = 0;
  for (const auto& s : samples) pos += s.label == 1 ? 1 : 0;
  if (pos == 0 || pos == samples.size()) {
    throw TrainingError(std::string(what) + ": training data has a single class (" + std::to_string(pos) +
                        " positives of " + std::to_string(samples.size()) + ")");
  }
}

std::vector<double> labels_of(std::span<const CtrSample> batch) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto& s : batch) y.push_back(static_cast<double>(s.label));
  return y;
}

void copy_side(std::span<double> out, const std::optional<Vector>& v, std::size_t dim, const char* name,
               const CtrSample& s) {
  if (!v) throw PreconditionError(std::string("sample ") + s.user_id + "/" + s.item_id + " lacks " + name);
  if (v->size() != dim) {
    throw DimensionError(std::string(name) + " of " + s.user_id + "/" + s.item_id + " has " + std::to_string(v->size()) +
                         " values, expected " + std::to_string(dim));
  }
  std::copy(v->begin(), v->end(), out.begin());
}

std::map<std::string, std::vector<CtrSample>> group_by_user(const std::vector<CtrSample>& samples) {
  std::map<std::string, std::vector<CtrSample>> out;
  for (const auto& s : samples) out[s.user_id].push_back(s);
  return out;
}

double full_joint_loss(JointModel& joint, const SideInputs& side,
                       const std::map<std::string, std::vector<CtrSample>>& by_user, std::size_t n) {
  double total = 0.0;
  for (const auto& [user, samples] : by_user) {
    total += joint_batch_loss(joint, side, user, samples, false) * static_cast<double>(samples.size());
  }
  return total / static_cast<double>(n);
}

SideInputs with_unit_scores(SideInputs side) {
  for (auto& [user, ui] : side.users) std::fill(ui.scores.begin(), ui.scores.end(), 1.0);
  return side;
}

}  // namespace

json to_json(const CtrSample& s, bool test) {
  return json{{"user_id", s.user_id},
              {"item_id", s.item_id},
              {"recent_item_ids", s.recent_item_ids},
              {"label", s.label},
              {"split", test ? "test" : "train"}};
}

CtrSample ctr_sample_from_json(const json& j, bool* test) {
  CtrSample s;
  s.user_id = j.at("user_id").get<std::string>();
  s.item_id = j.at("item_id").get<std::string>();
  s.recent_item_ids = j.at("recent_item_ids").get<std::vector<std::string>>();
  s.label = j.at("label").get<int>();
  if (s.label != 0 && s.label != 1) throw ParseError("ctr sample label must be 0 or 1", 0);
  if (test) *test = j.value("split", "train") == "test";
  return s;
}

SampleSplit build_samples(const std::vector<behavior::Interaction>& train, const std::vector<behavior::Interaction>& test,
                          std::size_t window) {
  struct Event {
    const behavior::Interaction* x;
    bool test;
  };
  std::map<std::string, std::vector<Event>> by_user;
  for (const auto& x : train) by_user[x.user_id].push_back({&x, false});
  for (const auto& x : test) by_user[x.user_id].push_back({&x, true});

  SampleSplit out;
  for (auto& [user, events] : by_user) {
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      if (a.x->ts != b.x->ts) return a.x->ts < b.x->ts;
      return a.x->item_id < b.x->item_id;
    });
    std::deque<std::string> recent;
    for (const auto& ev : events) {
      CtrSample s;
      s.user_id = user;
      s.item_id = ev.x->item_id;
      s.recent_item_ids.assign(recent.begin(), recent.end());
      s.label = ev.x->label;
      (ev.test ? out.test : out.train).push_back(std::move(s));
      if (window > 0) {
        recent.push_back(ev.x->item_id);
        if (recent.size() > window) recent.pop_front();
      }
    }
  }
  return out;
}

std::size_t CtrConfig::input_dim() const {
  return 3 * d_id + (use_e_user ? side_dim : 0) + (use_e_item ? side_dim : 0);
}

CtrModel::CtrModel(CtrConfig cfg, const std::vector<CtrSample>& train) : cfg_(std::move(cfg)) {
  if (cfg_.d_id == 0) throw ConfigError("ctr id embedding dimension must be >= 1");
  std::set<std::string> users;
  std::set<std::string> items;
  for (const auto& s : train) {
    users.insert(s.user_id);
    items.insert(s.item_id);
    items.insert(s.recent_item_ids.begin(), s.recent_item_ids.end());
  }
  for (const auto& u : users) users_.emplace(u, users_.size());
  for (const auto& i : items) items_.emplace(i, items_.size());
  mlp_ = nn::Mlp("ctr/mlp", cfg_.input_dim(), cfg_.hidden);
}

void CtrModel::init(Rng& rng) {
  params_.add(kUserEmb, nn::gaussian(users_.size(), cfg_.d_id, kEmbeddingStd, rng));
  params_.add(kItemEmb, nn::gaussian(items_.size(), cfg_.d_id, kEmbeddingStd, rng));
  mlp_.init(params_, rng);
}

std::optional<std::size_t> CtrModel::user_row(const std::string& id) const {
  auto it = users_.find(id);
  if (it == users_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> CtrModel::item_row(const std::string& id) const {
  auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

Vector CtrModel::assemble_features(const CtrSample& s) const {
  const Matrix x = features(std::span<const CtrSample>(&s, 1));
  return {x.row(0).begin(), x.row(0).end()};
}

Matrix CtrModel::features(std::span<const CtrSample> batch) const {
  const std::size_t d = cfg_.d_id;
  Matrix x(batch.size(), cfg_.input_dim());
  const Matrix& ue = params_.value(kUserEmb);
  const Matrix& ie = params_.value(kItemEmb);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& s = batch[r];
    auto row = x.row(r);
    if (auto u = user_row(s.user_id)) std::copy(ue.row(*u).begin(), ue.row(*u).end(), row.begin());
    if (!s.recent_item_ids.empty()) {
      const double inv = 1.0 / static_cast<double>(s.recent_item_ids.size());
      for (const auto& id : s.recent_item_ids) {
        if (auto i = item_row(id)) {
          for (std::size_t c = 0; c < d; ++c) row[d + c] += ie(*i, c) * inv;
        }
      }
    }
    if (auto i = item_row(s.item_id)) std::copy(ie.row(*i).begin(), ie.row(*i).end(), row.begin() + 2 * d);
    std::size_t offset = 3 * d;
    if (cfg_.use_e_user) {
      copy_side(row.subspan(offset, cfg_.side_dim), s.e_user, cfg_.side_dim, "e_user", s);
      offset += cfg_.side_dim;
    }
    if (cfg_.use_e_item) copy_side(row.subspan(offset, cfg_.side_dim), s.e_item, cfg_.side_dim, "e_item", s);
  }
  return x;
}

Vector CtrModel::logits(std::span<const CtrSample> batch, nn::Mlp::Cache* cache) const {
  return mlp_.forward(params_, features(batch), cache);
}

Vector CtrModel::predict(std::span<const CtrSample> batch) const {
  Vector p = logits(batch);
  for (double& z : p) z = nn::sigmoid(z);
  return p;
}

CtrModel::SideGrads CtrModel::backward(std::span<const CtrSample> batch, const nn::Mlp::Cache& cache,
                                       std::span<const double> dlogits) {
  const Matrix dx = mlp_.backward(params_, cache, dlogits);
  const std::size_t d = cfg_.d_id;
  Matrix& gu = params_.grad(kUserEmb);
  Matrix& gi = params_.grad(kItemEmb);
  SideGrads out;
  if (cfg_.use_e_user) out.d_user = Matrix(batch.size(), cfg_.side_dim);
  if (cfg_.use_e_item) out.d_item = Matrix(batch.size(), cfg_.side_dim);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& s = batch[r];
    const auto g = dx.row(r);
    if (auto u = user_row(s.user_id)) {
      for (std::size_t c = 0; c < d; ++c) gu(*u, c) += g[c];
    }
    if (!s.recent_item_ids.empty()) {
      const double inv = 1.0 / static_cast<double>(s.recent_item_ids.size());
      for (const auto& id : s.recent_item_ids) {
        if (auto i = item_row(id)) {
          for (std::size_t c = 0; c < d; ++c) gi(*i, c) += g[d + c] * inv;
        }
      }
    }
    if (auto i = item_row(s.item_id)) {
      for (std::size_t c = 0; c < d; ++c) gi(*i, c) += g[2 * d + c];
    }
    std::size_t offset = 3 * d;
    if (cfg_.use_e_user) {
      std::copy(g.begin() + offset, g.begin() + offset + cfg_.side_dim, out.d_user.row(r).begin());
      offset += cfg_.side_dim;
    }
    if (cfg_.use_e_item) std::copy(g.begin() + offset, g.begin() + offset + cfg_.side_dim, out.d_item.row(r).begin());
  }
  return out;
}

json CtrModel::to_json() const {
  json users = json::array();
  std::vector<std::string> by_row(users_.size());
  for (const auto& [id, row] : users_) by_row[row] = id;
  for (const auto& id : by_row) users.push_back(id);
  json items = json::array();
  by_row.assign(items_.size(), {});
  for (const auto& [id, row] : items_) by_row[row] = id;
  for (const auto& id : by_row) items.push_back(id);
  return json{{"config",
               {{"d_id", cfg_.d_id},
                {"side_dim", cfg_.side_dim},
                {"use_e_user", cfg_.use_e_user},
                {"use_e_item", cfg_.use_e_item},
                {"hidden", cfg_.hidden}}},
              {"users", users},
              {"items", items},
              {"params", params_.to_json()}};
}

CtrModel CtrModel::from_json(const json& j) {
  CtrModel m;
  const auto& c = j.at("config");
  m.cfg_.d_id = c.at("d_id").get<std::size_t>();
  m.cfg_.side_dim = c.at("side_dim").get<std::size_t>();
  m.cfg_.use_e_user = c.at("use_e_user").get<bool>();
  m.cfg_.use_e_item = c.at("use_e_item").get<bool>();
  m.cfg_.hidden = c.at("hidden").get<std::vector<std::size_t>>();
  for (const auto& u : j.at("users")) m.users_.emplace(u.get<std::string>(), m.users_.size());
  for (const auto& i : j.at("items")) m.items_.emplace(i.get<std::string>(), m.items_.size());
  m.mlp_ = nn::Mlp("ctr/mlp", m.cfg_.input_dim(), m.cfg_.hidden);
  m.params_ = nn::ParamStore::from_json(j.at("params"));
  for (const auto& name : {kUserEmb, kItemEmb}) {
    if (!m.params_.contains(name)) throw ParseError("ctr model lacks parameter '" + name + "'", 0);
  }
  return m;
}

CtrModel train_ctr(const std::vector<CtrSample>& train, const CtrConfig& cfg, const CtrHyper& hyper,
                   CtrTrainReport* report) {
  require_both_classes(train, "train_ctr");
  CtrModel model(cfg, train);
  Rng rng(hyper.seed);
  model.init(rng);
  nn::Adam opt({hyper.lr});

  const std::size_t n = train.size();
  const std::size_t batch = hyper.batch == 0 || hyper.batch > n ? n : hyper.batch;
  const std::vector<double> all_labels = labels_of(train);
  auto full_loss = [&] { return nn::bce_with_logits(model.logits(train), all_labels).loss; };

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<CtrSample> rows;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (report) report->epoch_loss.push_back(full_loss());
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      rows.clear();
      for (std::size_t i = start; i < std::min(n, start + batch); ++i) rows.push_back(train[order[i]]);
      nn::Mlp::Cache cache;
      const Vector z = model.logits(rows, &cache);
      const auto loss = nn::bce_with_logits(z, labels_of(rows));
      model.params().zero_grad();
      model.backward(rows, cache, loss.grad);
      opt.step(model.params());
    }
  }
  if (report) report->final_loss = full_loss();
  return model;
}

Metrics evaluate(const CtrModel& model, const std::vector<CtrSample>& test) {
  if (test.empty()) throw PreconditionError("evaluate: no test samples");
  const Vector p = model.predict(test);
  const std::vector<double> y = labels_of(test);
  Metrics m;
  m.n = test.size();
  m.logloss = metrics::logloss(p, y);
  try {
    m.auc = metrics::auc(p, y);
  } catch (const UndefinedAuc&) {
    m.auc.reset();
  }
  return m;
}

double joint_batch_loss(JointModel& joint, const SideInputs& side, const std::string& user_id,
                        std::span<const CtrSample> batch, bool with_grad) {
  const auto& cfg = joint.ctr.config();
  auto& params = joint.ctr.params();
  std::vector<CtrSample> rows(batch.begin(), batch.end());

  const auto user_it = side.users.find(user_id);
  const bool fused = cfg.use_e_user && user_it != side.users.end();
  fusion::FusionModel::UserState state;
  std::vector<fusion::FusionModel::ItemCache> caches;
  if (cfg.use_e_user || cfg.use_e_item) {
    if (fused) {
      state = joint.fusion.prepare(params, user_it->second.e, user_it->second.scores);
      caches.resize(rows.size());
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto item_it = side.items.find(rows[r].item_id);
      const Vector e_item = item_it != side.items.end() ? item_it->second : Vector(cfg.side_dim, 0.0);
      if (cfg.use_e_user) {
        rows[r].e_user = fused ? joint.fusion.user_vector(params, state, e_item, &caches[r]) : Vector(cfg.side_dim, 0.0);
      }
      rows[r].e_item = e_item;
    }
  }

  nn::Mlp::Cache cache;
  const Vector z = joint.ctr.logits(rows, with_grad ? &cache : nullptr);
  const auto loss = nn::bce_with_logits(z, labels_of(rows));
  if (!with_grad) return loss.loss;

  const auto side_grads = joint.ctr.backward(rows, cache, loss.grad);
  if (fused && joint.fusion.has_params()) {
    auto acc = joint.fusion.make_grad(state);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      joint.fusion.item_backward(params, state, *rows[r].e_item, caches[r], side_grads.d_user.row(r), acc);
    }
    joint.fusion.user_backward(params, state, acc);
  }
  return loss.loss;
}

JointModel train_joint(const std::vector<CtrSample>& train, const SideInputs& side, const fusion::FusionConfig& fcfg,
                       const CtrConfig& cfg, const CtrHyper& hyper, CtrTrainReport* report) {
  require_both_classes(train, "train_joint");
  if ((cfg.use_e_user || cfg.use_e_item) && fcfg.d != cfg.side_dim) {
    throw DimensionError("fusion dimension " + std::to_string(fcfg.d) + " differs from ctr side dimension " +
                         std::to_string(cfg.side_dim));
  }
  JointModel joint{CtrModel(cfg, train), fusion::FusionModel(fcfg)};
  Rng rng(hyper.seed);
  joint.ctr.init(rng);
  if (cfg.use_e_user) joint.fusion.init(joint.ctr.params(), rng);
  nn::Adam opt({hyper.lr});

  const auto by_user = group_by_user(train);
  std::vector<const std::string*> users;
  for (const auto& [u, _] : by_user) users.push_back(&u);
  const std::size_t batch = hyper.batch == 0 ? std::numeric_limits<std::size_t>::max() : hyper.batch;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (report) report->epoch_loss.push_back(full_joint_loss(joint, side, by_user, train.size()));
    rng.shuffle(users);
    for (const std::string* user : users) {
      const auto& samples = by_user.at(*user);
      for (std::size_t start = 0; start < samples.size(); start += batch) {
        const std::size_t len = std::min(batch, samples.size() - start);
        joint.ctr.params().zero_grad();
        joint_batch_loss(joint, side, *user, std::span<const CtrSample>(samples.data() + start, len), true);
        opt.step(joint.ctr.params());
      }
    }
  }
  if (report) report->final_loss = full_joint_loss(joint, side, by_user, train.size());
  return joint;
}

void attach_side_info(std::vector<CtrSample>& samples, const fusion::FusionModel& fusion, const nn::ParamStore& params,
                      const SideInputs& side) {
  const std::size_t d = fusion.config().d;
  std::map<std::string, fusion::FusionModel::UserState> states;
  for (auto& s : samples) {
    auto item_it = side.items.find(s.item_id);
    s.e_item = item_it != side.items.end() ? item_it->second : Vector(d, 0.0);
    auto user_it = side.users.find(s.user_id);
    if (user_it == side.users.end()) {
      s.e_user = Vector(d, 0.0);
      continue;
    }
    auto st = states.find(s.user_id);
    if (st == states.end()) {
      st = states.emplace(s.user_id, fusion.prepare(params, user_it->second.e, user_it->second.scores)).first;
    }
    s.e_user = fusion.user_vector(params, st->second, *s.e_item);
  }
}

std::vector<AblationRung> ablation_rungs(bool fusion_variants) {
  using fusion::Variant;
  std::vector<AblationRung> rungs{
      {"base", InterestSource::none, Variant::mean_pool, false},
      {"+CUBE", InterestSource::cascade, Variant::mean_pool, false},
      {"+CUBE+TIF", InterestSource::cascade, Variant::tif, true},
      {"+CUBE+TIF+HTS", InterestSource::search, Variant::tif, false},
  };
  if (fusion_variants) {
    rungs.push_back({"MLP", InterestSource::search, Variant::mlp, false});
    rungs.push_back({"SA", InterestSource::search, Variant::self_attention, false});
    rungs.push_back({"TIF", InterestSource::search, Variant::tif, false});
  }
  return rungs;
}

std::vector<AblationRow> run_ablation(const AblationInputs& inputs, const AblationOptions& opts) {
  std::vector<AblationRow> rows;
  std::map<std::tuple<int, int, bool, std::uint64_t>, Metrics> done;
  std::optional<SideInputs> cascade_unit;
  if (inputs.cascade) cascade_unit = with_unit_scores(*inputs.cascade);

  for (const auto& rung : ablation_rungs(opts.fusion_variants)) {
    const SideInputs* side = nullptr;
    if (rung.source == InterestSource::cascade) {
      side = inputs.cascade ? (rung.unit_scores ? &*cascade_unit : &*inputs.cascade) : nullptr;
    } else if (rung.source == InterestSource::search) {
      side = inputs.search ? &*inputs.search : nullptr;
    }
    for (std::uint64_t seed : opts.seeds) {
      AblationRow row{rung.name, seed, std::nullopt, {}};
      if (rung.source != InterestSource::none && side == nullptr) {
        row.skip_reason = rung.source == InterestSource::cascade ? "cascade interests unavailable"
                                                                 : "searched interests unavailable";
        rows.push_back(std::move(row));
        continue;
      }
      const auto key = std::make_tuple(static_cast<int>(rung.source), static_cast<int>(rung.variant), rung.unit_scores, seed);
      if (auto it = done.find(key); it != done.end()) {
        row.metrics = it->second;
        rows.push_back(std::move(row));
        continue;
      }
      CtrConfig cfg = opts.ctr;
      cfg.use_e_user = cfg.use_e_item = rung.source != InterestSource::none;
      CtrHyper hyper = opts.hyper;
      hyper.seed = seed;
      std::vector<CtrSample> train = inputs.train;
      std::vector<CtrSample> test = inputs.test;
      if (side) {
        // Fusion is learned jointly with a CTR head, then frozen; the
        // reported model is trained afresh on the frozen side vectors.
        const fusion::FusionConfig fcfg{cfg.side_dim, rung.variant, opts.cross_mode};
        fusion::FusionModel frozen(fcfg);
        nn::ParamStore params;
        if (frozen.has_params()) {
          JointModel joint = train_joint(inputs.train, *side, fcfg, cfg, hyper);
          frozen = joint.fusion;
          params = std::move(joint.ctr.params());
        }
        attach_side_info(train, frozen, params, *side);
        attach_side_info(test, frozen, params, *side);
      }
      row.metrics = evaluate(train_ctr(train, cfg, hyper), test);
      done.emplace(key, *row.metrics);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

json ablation_report(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row{{"name", r.name}, {"seed", r.seed}};
    if (r.metrics) {
      row["auc"] = r.metrics->auc ? json(*r.metrics->auc) : json(nullptr);
      row["logloss"] = r.metrics->logloss;
      row["n"] = r.metrics->n;
    } else {
      row["skipped"] = true;
      row["reason"] = r.skip_reason;
    }
    out.push_back(std::move(row));
  }
  return json{{"rows", out}};
}

}  // namespace hitlbm::ctr
