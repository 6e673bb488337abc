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

#include "hitlbm/pipeline/stages.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "hitlbm/ctr.hpp"
#include "hitlbm/error.hpp"
#include "hitlbm/fusion.hpp"
#include "hitlbm/io.hpp"
#include "hitlbm/metrics.hpp"
#include "hitlbm/parallel.hpp"
#include "hitlbm/rating.hpp"
#include "hitlbm/synth.hpp"
#include "hitlbm/tree_search.hpp"

namespace hitlbm::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Stage, std::string_view>>& stage_names() {
  static const std::vector<std::pair<Stage, std::string_view>> names{
      {Stage::synth, "synth"},
      {Stage::ingest, "ingest"},
      {Stage::chunk, "chunk"},
      {Stage::cascade, "cascade"},
      {Stage::build_rating_data, "build-rating-data"},
      {Stage::train_rating, "train-rating"},
      {Stage::search, "search"},
      {Stage::fuse, "fuse"},
      {Stage::train_ctr, "train-ctr"},
      {Stage::evaluate, "evaluate"},
      {Stage::ablate, "ablate"},
  };
  return names;
}

/// Shared state of one stage run: paths, logging, lazily built backends.
class Context {
 public:
  Context(const PipelineConfig& cfg, const RunOptions& opts)
      : cfg_(cfg), work_(cfg.work_dir()), workers_(opts.workers ? opts.workers : cfg.general.workers), log_(opts.log) {}

  const PipelineConfig& cfg() const { return cfg_; }
  std::size_t workers() const { return workers_; }
  fs::path path(std::string_view name) const { return work_ / name; }

  /// Path of an input artifact; throws UpstreamMissing if absent.
  fs::path need(std::string_view name, Stage producer) const {
    fs::path p = path(name);
    if (!fs::exists(p)) throw UpstreamMissing(p.string(), std::string(to_string(producer)));
    return p;
  }

  template <typename... Args>
  void log(Args&&... args) const {
    if (!log_) return;
    ((*log_) << ... << args) << '\n';
  }

  llm::Gateway& gateway() {
    if (!gateway_) {
      const auto& l = cfg_.llm;
      llm::BackendDescriptor desc{l.backend, l.endpoint, l.max_in_flight, cfg_.cache_dir(), l.timeout_ms, l.retries};
      llm::MockPolicy mock{l.mock_n_categories, l.mock_p_corrupt, l.mock_max_interest_tokens};
      gateway_ = std::make_unique<llm::Gateway>(std::shared_ptr<llm::Backend>(llm::make_backend(desc, mock)),
                                                l.max_in_flight, cfg_.cache_dir());
    }
    return *gateway_;
  }

  const encoder::TextEncoder& encoder() {
    if (!encoder_) {
      const auto& e = cfg_.encoder;
      encoder_ = encoder::make_encoder({e.backend, e.endpoint, e.d, e.seed, cfg_.llm.timeout_ms, cfg_.llm.retries});
    }
    return *encoder_;
  }

  search::SearchConfig search_config() const {
    search::SearchConfig s;
    s.n_expand = cfg_.search.n_expand;
    s.k_prev = cfg_.rating.K;
    s.alpha = cfg_.search.alpha;
    s.seed = cfg_.search.seed;
    s.temperature = cfg_.llm.temperature;
    s.max_tokens = cfg_.llm.max_tokens;
    return s;
  }

 private:
  const PipelineConfig& cfg_;
  fs::path work_;
  std::size_t workers_;
  std::ostream* log_;
  std::unique_ptr<llm::Gateway> gateway_;
  std::shared_ptr<const encoder::TextEncoder> encoder_;
};

// ---- artifact readers ---------------------------------------------------------

std::vector<behavior::Interaction> read_labelled(const fs::path& p) {
  std::vector<behavior::Interaction> out;
  io::for_each_jsonl(p, [&](const json& j, std::size_t) { out.push_back(behavior::labelled_from_json(j)); });
  return out;
}

std::vector<behavior::ChunkSequence> read_chunks(const fs::path& p) {
  std::vector<behavior::ChunkSequence> out;
  io::for_each_jsonl(p, [&](const json& j, std::size_t) {
    auto chunk = behavior::chunk_from_json(j);
    if (out.empty() || out.back().user_id != chunk.user_id) out.push_back({chunk.user_id, {}});
    out.back().chunks.push_back(std::move(chunk));
  });
  return out;
}

std::vector<rating::CascadeUser> read_cascade(const fs::path& p) {
  std::vector<rating::CascadeUser> out;
  io::for_each_jsonl(p, [&](const json& j, std::size_t) { out.push_back(search::cascade_user_from_json(j)); });
  return out;
}

struct SampleSet {
  std::vector<ctr::CtrSample> train;
  std::vector<ctr::CtrSample> test;
};

SampleSet read_samples(const fs::path& p) {
  SampleSet out;
  io::for_each_jsonl(p, [&](const json& j, std::size_t) {
    bool test = false;
    auto s = ctr::ctr_sample_from_json(j, &test);
    (test ? out.test : out.train).push_back(std::move(s));
  });
  return out;
}

rating::RatingModel read_model(const fs::path& p) { return rating::RatingModel::from_json(io::read_json(p)); }

// ---- side information -----------------------------------------------------------

/// Item-knowledge vectors for every item appearing in `items`.
std::map<std::string, nn::Vector> item_vectors(Context& ctx, const std::vector<behavior::Interaction>& items) {
  std::map<std::string, const behavior::Interaction*> unique;
  for (const auto& x : items) unique.emplace(x.item_id, &x);
  std::vector<const behavior::Interaction*> list;
  for (const auto& [_, x] : unique) list.push_back(x);

  auto& gateway = ctx.gateway();
  const auto& enc = ctx.encoder();
  std::vector<nn::Vector> vecs(list.size());
  parallel_for(list.size(), ctx.workers(), [&](std::size_t i) {
    vecs[i] = fusion::item_knowledge_vector(*list[i], gateway, enc, ctx.cfg().llm.item_seed);
  });
  std::map<std::string, nn::Vector> out;
  for (std::size_t i = 0; i < list.size(); ++i) out.emplace(list[i]->item_id, std::move(vecs[i]));
  return out;
}

std::vector<behavior::Interaction> all_interactions(Context& ctx) {
  auto all = read_labelled(ctx.need(artifact::kTrain, Stage::ingest));
  auto test = read_labelled(ctx.need(artifact::kTest, Stage::ingest));
  all.insert(all.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
  return all;
}

ctr::UserInterests encode_user(Context& ctx, const std::vector<std::string>& texts, const std::vector<double>& scores) {
  return {fusion::encode_interests(texts, ctx.encoder(), ctx.cfg().encoder.d), scores};
}

ctr::SideInputs searched_side(Context& ctx, std::map<std::string, nn::Vector> items) {
  ctr::SideInputs side;
  side.items = std::move(items);
  const auto trees = search::trees_from_records(io::read_jsonl(ctx.need(artifact::kInterests, Stage::search)));
  for (const auto& tree : trees) {
    if (tree.depth == 0) continue;
    const auto path = search::selected_path(tree);
    side.users.emplace(tree.user_id, encode_user(ctx, path.interests, path.scores));
  }
  return side;
}

ctr::SideInputs cascade_side(Context& ctx, const fs::path& cascade_path, std::map<std::string, nn::Vector> items) {
  ctr::SideInputs side;
  side.items = std::move(items);
  for (const auto& user : read_cascade(cascade_path)) {
    if (user.steps.empty()) continue;
    std::vector<std::string> texts;
    for (const auto& s : user.steps) texts.push_back(s.interest);
    side.users.emplace(user.user_id, encode_user(ctx, texts, std::vector<double>(texts.size(), 1.0)));
  }
  return side;
}

ctr::CtrConfig ctr_config(const PipelineConfig& cfg) {
  ctr::CtrConfig c;
  c.d_id = cfg.ctr.d_id;
  c.side_dim = cfg.encoder.d;
  c.use_e_user = cfg.ctr.use_e_user;
  c.use_e_item = cfg.ctr.use_e_item;
  c.hidden = cfg.ctr.hidden;
  return c;
}

ctr::CtrHyper ctr_hyper(const PipelineConfig& cfg) { return {cfg.ctr.lr, cfg.ctr.epochs, cfg.ctr.batch, cfg.ctr.seed}; }

fusion::FusionConfig fusion_config(const PipelineConfig& cfg) {
  return {cfg.encoder.d, cfg.fusion.variant, cfg.fusion.cross_mode};
}

json fusion_params_json(const ctr::JointModel& joint) {
  const json all = joint.ctr.params().to_json();
  json params = json::object();
  for (const auto& [name, value] : all.items()) {
    if (name.rfind("fusion/", 0) == 0) params[name] = value;
  }
  return json{{"config", joint.fusion.config_json()}, {"params", params}};
}

json metrics_json(const ctr::Metrics& m) {
  return json{{"auc", m.auc ? json(*m.auc) : json(nullptr)}, {"logloss", m.logloss}, {"n", m.n}};
}

// ---- stages -----------------------------------------------------------------

void run_synth(Context& ctx) {
  const auto ds = synth::generate_dataset(ctx.cfg().synth);
  io::JsonlBuffer interactions;
  for (const auto& x : ds.interactions) interactions.add(synth::interaction_record(x));
  io::JsonlBuffer truth;
  for (const auto& t : ds.traces)
    for (const auto& r : synth::ground_truth_records(t)) truth.add(r);
  io::JsonlBuffer catalog;
  for (const auto& c : ds.catalog) catalog.add(json{{"item_id", c.item_id}, {"title", c.title}, {"category", c.category}});
  interactions.write(ctx.path(artifact::kInteractions));
  truth.write(ctx.path(artifact::kGroundTruth));
  catalog.write(ctx.path(artifact::kCatalog));
  ctx.log("synth: ", ds.interactions.size(), " interactions, ", ds.traces.size(), " users, ", ds.catalog.size(), " items");
}

void run_ingest(Context& ctx) {
  const auto& data = ctx.cfg().data;
  fs::path input;
  if (data.input.empty()) {
    input = ctx.need(artifact::kInteractions, Stage::synth);
  } else {
    input = ctx.cfg().resolve(data.input);
    if (!fs::exists(input)) throw ConfigError("data.input '" + input.string() + "' does not exist");
  }
  auto users = behavior::filter_min_interactions(behavior::ingest(input, data.label_policy), data.min_reviews);
  std::vector<behavior::Interaction> all;
  for (auto& u : users) all.insert(all.end(), u.items.begin(), u.items.end());
  if (all.empty()) throw PreconditionError("ingest: no user has at least " + std::to_string(data.min_reviews) + " interactions");
  const auto split = behavior::time_split(std::move(all), data.split_ratio);
  io::JsonlBuffer train;
  for (const auto& x : split.train) train.add(behavior::to_json(x));
  io::JsonlBuffer test;
  for (const auto& x : split.test) test.add(behavior::to_json(x));
  train.write(ctx.path(artifact::kTrain));
  test.write(ctx.path(artifact::kTest));
  ctx.log("ingest: ", users.size(), " users kept, ", split.train.size(), " train / ", split.test.size(), " test");
}

void run_chunk(Context& ctx) {
  const auto users = behavior::group_by_user(read_labelled(ctx.need(artifact::kTrain, Stage::ingest)));
  io::JsonlBuffer out;
  std::size_t n = 0;
  for (const auto& u : users) {
    for (const auto& c : behavior::chunk_history(u.user_id, u.items, ctx.cfg().L).chunks) {
      out.add(behavior::to_json(c));
      ++n;
    }
  }
  out.write(ctx.path(artifact::kChunks));
  ctx.log("chunk: ", n, " chunks of up to ", ctx.cfg().L, " items for ", users.size(), " users");
}

void run_cascade_stage(Context& ctx) {
  const auto users = read_chunks(ctx.need(artifact::kChunks, Stage::chunk));
  const auto scfg = ctx.search_config();
  auto& gateway = ctx.gateway();
  std::vector<rating::CascadeUser> out(users.size());
  parallel_for(users.size(), ctx.workers(), [&](std::size_t i) { out[i] = search::run_cascade(users[i], scfg, gateway); });
  io::JsonlBuffer buf;
  for (const auto& u : out) buf.add(search::to_json(u));
  buf.write(ctx.path(artifact::kCascade));
  ctx.log("cascade: ", out.size(), " users, ", gateway.backend_calls(), " backend calls, ", gateway.cache_hits(),
          " cache hits");
}

void run_build_rating_data(Context& ctx) {
  const auto users = read_cascade(ctx.need(artifact::kCascade, Stage::cascade));
  rating::RatingDataOptions opts;
  opts.n_eval = ctx.cfg().rating.n_eval;
  opts.k_prev = ctx.cfg().rating.K;
  opts.seed = ctx.cfg().rating.eval_seed;
  opts.prompt.max_prev_interests = ctx.cfg().rating.K;
  const auto data = rating::build_rating_datasets(users, opts, ctx.gateway(), ctx.workers());
  io::JsonlBuffer buf;
  std::size_t cont_pos = 0;
  std::size_t eff_pos = 0;
  for (const auto& ex : data.cont) {
    buf.add(rating::to_json(ex));
    cont_pos += static_cast<std::size_t>(ex.label);
  }
  for (const auto& ex : data.eff) {
    buf.add(rating::to_json(ex));
    eff_pos += static_cast<std::size_t>(ex.label);
  }
  buf.write(ctx.path(artifact::kRatingTrain));
  const json summary{{"cont", data.cont.size()},
                     {"cont_positive", cont_pos},
                     {"eff", data.eff.size()},
                     {"eff_positive", eff_pos},
                     {"skipped_chunks", data.skipped_chunks}};
  io::write_atomic(ctx.path(artifact::kRatingSummary), summary.dump(2) + "\n");
  ctx.log("build-rating-data: continuity ", data.cont.size(), " (", cont_pos, " positive), effectiveness ",
          data.eff.size(), " (", eff_pos, " positive), ", data.skipped_chunks, " chunks skipped");
}

void run_train_rating(Context& ctx) {
  std::vector<rating::RatingExample> cont;
  std::vector<rating::RatingExample> eff;
  io::for_each_jsonl(ctx.need(artifact::kRatingTrain, Stage::build_rating_data), [&](const json& j, std::size_t) {
    auto ex = rating::rating_example_from_json(j);
    (ex.kind == rating::ExampleKind::cont ? cont : eff).push_back(std::move(ex));
  });
  const auto& r = ctx.cfg().rating;
  const rating::RatingHyper hyper{r.lr, r.epochs, r.batch, r.hidden, r.seed};
  const auto& enc = ctx.encoder();
  rating::TrainReport srm_report;
  rating::TrainReport prm_report;
  const auto srm = rating::train_rating_model(rating::RaterKind::srm, cont, enc, r.K, hyper, &srm_report);
  const auto prm = rating::train_rating_model(rating::RaterKind::prm, eff, enc, r.K, hyper, &prm_report);
  io::write_atomic(ctx.path(artifact::kSrm), srm.to_json().dump() + "\n");
  io::write_atomic(ctx.path(artifact::kPrm), prm.to_json().dump() + "\n");
  ctx.log("train-rating: SRM loss ", srm_report.epoch_loss.front(), " -> ", srm_report.final_loss, " on ", cont.size(),
          " examples; PRM loss ", prm_report.epoch_loss.front(), " -> ", prm_report.final_loss, " on ", eff.size(),
          " examples");
}

void run_search_stage(Context& ctx) {
  const auto users = read_chunks(ctx.need(artifact::kChunks, Stage::chunk));
  const auto srm = read_model(ctx.need(artifact::kSrm, Stage::train_rating));
  const auto prm = read_model(ctx.need(artifact::kPrm, Stage::train_rating));
  const search::ModelScorer scorer(srm, prm, ctx.encoder());
  const auto scfg = ctx.search_config();
  auto& gateway = ctx.gateway();
  std::vector<search::SearchResult> results(users.size());
  parallel_for(users.size(), ctx.workers(),
               [&](std::size_t i) { results[i] = search::run_search(users[i], scfg, gateway, scorer); });
  io::JsonlBuffer buf;
  std::size_t nodes = 0;
  for (const auto& r : results) {
    for (const auto& rec : search::tree_records(r.tree)) buf.add(rec);
    nodes += r.tree.nodes.size();
  }
  buf.write(ctx.path(artifact::kInterests));
  ctx.log("search: ", results.size(), " users, ", nodes, " nodes");
}

void run_fuse(Context& ctx) {
  const auto train = read_labelled(ctx.need(artifact::kTrain, Stage::ingest));
  const auto test = read_labelled(ctx.need(artifact::kTest, Stage::ingest));
  ctx.need(artifact::kInterests, Stage::search);
  auto samples = ctr::build_samples(train, test, ctx.cfg().ctr.window);
  io::JsonlBuffer sample_buf;
  for (const auto& s : samples.train) sample_buf.add(ctr::to_json(s, false));
  for (const auto& s : samples.test) sample_buf.add(ctr::to_json(s, true));

  auto all = train;
  all.insert(all.end(), test.begin(), test.end());
  const auto side = searched_side(ctx, item_vectors(ctx, all));
  auto cfg = ctr_config(ctx.cfg());
  cfg.use_e_user = true;
  cfg.use_e_item = true;
  const auto joint = ctr::train_joint(samples.train, side, fusion_config(ctx.cfg()), cfg, ctr_hyper(ctx.cfg()));
  ctr::attach_side_info(samples.test, joint.fusion, joint.ctr.params(), side);

  io::JsonlBuffer fused;
  for (const auto& s : samples.test) fused.add(fusion::to_json(fusion::FusedRecord{s.user_id, s.item_id, *s.e_user, *s.e_item}));
  sample_buf.write(ctx.path(artifact::kCtrSamples));
  io::write_atomic(ctx.path(artifact::kFusionParams), fusion_params_json(joint).dump() + "\n");
  fused.write(ctx.path(artifact::kFused));
  ctx.log("fuse: ", samples.train.size(), " train / ", samples.test.size(), " test samples, ", side.users.size(),
          " users with interests, variant ", fusion::to_string(joint.fusion.config().variant));
}

void run_train_ctr(Context& ctx) {
  auto samples = read_samples(ctx.need(artifact::kCtrSamples, Stage::fuse));
  const auto fparams = io::read_json(ctx.need(artifact::kFusionParams, Stage::fuse));
  const fusion::FusionModel fusion(fusion::FusionModel::config_from_json(fparams.at("config")));
  const auto store = nn::ParamStore::from_json(fparams.at("params"));
  const auto side = searched_side(ctx, item_vectors(ctx, all_interactions(ctx)));
  ctr::attach_side_info(samples.train, fusion, store, side);
  ctr::CtrTrainReport report;
  const auto model = ctr::train_ctr(samples.train, ctr_config(ctx.cfg()), ctr_hyper(ctx.cfg()), &report);
  io::write_atomic(ctx.path(artifact::kCtrModel), model.to_json().dump() + "\n");
  ctx.log("train-ctr: loss ", report.epoch_loss.empty() ? report.final_loss : report.epoch_loss.front(), " -> ",
          report.final_loss, " on ", samples.train.size(), " samples");
}

void run_evaluate(Context& ctx) {
  const auto model = ctr::CtrModel::from_json(io::read_json(ctx.need(artifact::kCtrModel, Stage::train_ctr)));
  auto samples = read_samples(ctx.need(artifact::kCtrSamples, Stage::fuse));
  std::map<std::pair<std::string, std::string>, fusion::FusedRecord> fused;
  io::for_each_jsonl(ctx.need(artifact::kFused, Stage::fuse), [&](const json& j, std::size_t) {
    auto r = fusion::fused_from_json(j);
    auto key = std::make_pair(r.user_id, r.item_id);
    fused.emplace(std::move(key), std::move(r));
  });
  for (auto& s : samples.test) {
    auto it = fused.find({s.user_id, s.item_id});
    if (it == fused.end()) throw PreconditionError("fused.jsonl has no vectors for " + s.user_id + "/" + s.item_id);
    s.e_user = it->second.e_user;
    s.e_item = it->second.e_item;
  }
  const auto m = ctr::evaluate(model, samples.test);
  io::write_atomic(ctx.path(artifact::kMetrics), metrics_json(m).dump(2) + "\n");
  ctx.log("evaluate: AUC ", m.auc ? std::to_string(*m.auc) : std::string("undefined"), ", logloss ", m.logloss, " on ",
          m.n, " samples");
}

void run_ablate(Context& ctx) {
  const auto samples = read_samples(ctx.need(artifact::kCtrSamples, Stage::fuse));
  ctr::AblationInputs inputs;
  inputs.train = samples.train;
  inputs.test = samples.test;
  const auto items = item_vectors(ctx, all_interactions(ctx));
  if (fs::exists(ctx.path(artifact::kCascade))) inputs.cascade = cascade_side(ctx, ctx.path(artifact::kCascade), items);
  if (fs::exists(ctx.path(artifact::kInterests))) inputs.search = searched_side(ctx, items);

  ctr::AblationOptions opts;
  opts.seeds = ctx.cfg().ablation.seeds;
  opts.fusion_variants = ctx.cfg().ablation.fusion_variants;
  opts.ctr = ctr_config(ctx.cfg());
  opts.hyper = ctr_hyper(ctx.cfg());
  opts.cross_mode = ctx.cfg().fusion.cross_mode;
  const auto rows = ctr::run_ablation(inputs, opts);
  io::write_atomic(ctx.path(artifact::kAblation), ctr::ablation_report(rows).dump(2) + "\n");
  for (const auto& r : rows) {
    if (r.metrics && r.metrics->auc) {
      ctx.log("ablate: ", r.name, " seed ", r.seed, " AUC ", *r.metrics->auc, " logloss ", r.metrics->logloss);
    } else if (!r.metrics) {
      ctx.log("ablate: ", r.name, " seed ", r.seed, " skipped (", r.skip_reason, ")");
    }
  }
}

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& [s, name] : stage_names()) {
    if (s == stage) return name;
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (const auto& [s, n] : stage_names()) {
    if (n == name) return s;
  }
  return std::nullopt;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> order = [] {
    std::vector<Stage> v;
    for (const auto& [s, _] : stage_names()) v.push_back(s);
    return v;
  }();
  return order;
}

std::vector<std::string> stage_outputs(Stage stage) {
  using namespace artifact;
  auto list = [](std::initializer_list<std::string_view> names) {
    return std::vector<std::string>(names.begin(), names.end());
  };
  switch (stage) {
    case Stage::synth:
      return list({kInteractions, kGroundTruth, kCatalog});
    case Stage::ingest:
      return list({kTrain, kTest});
    case Stage::chunk:
      return list({kChunks});
    case Stage::cascade:
      return list({kCascade});
    case Stage::build_rating_data:
      return list({kRatingTrain, kRatingSummary});
    case Stage::train_rating:
      return list({kSrm, kPrm});
    case Stage::search:
      return list({kInterests});
    case Stage::fuse:
      return list({kCtrSamples, kFusionParams, kFused});
    case Stage::train_ctr:
      return list({kCtrModel});
    case Stage::evaluate:
      return list({kMetrics});
    case Stage::ablate:
      return list({kAblation});
  }
  return {};
}

StageResult run_stage(Stage stage, const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  Context ctx(cfg, opts);
  StageResult result;
  for (const auto& name : stage_outputs(stage)) result.outputs.push_back(ctx.path(name));
  const bool present = std::all_of(result.outputs.begin(), result.outputs.end(), [](const fs::path& p) { return fs::exists(p); });
  if (present && !opts.force) {
    ctx.log(to_string(stage), ": outputs present, skipping (use --force to re-run)");
    result.skipped = true;
    return result;
  }
  fs::create_directories(cfg.work_dir());

  switch (stage) {
    case Stage::synth:
      run_synth(ctx);
      break;
    case Stage::ingest:
      run_ingest(ctx);
      break;
    case Stage::chunk:
      run_chunk(ctx);
      break;
    case Stage::cascade:
      run_cascade_stage(ctx);
      break;
    case Stage::build_rating_data:
      run_build_rating_data(ctx);
      break;
    case Stage::train_rating:
      run_train_rating(ctx);
      break;
    case Stage::search:
      run_search_stage(ctx);
      break;
    case Stage::fuse:
      run_fuse(ctx);
      break;
    case Stage::train_ctr:
      run_train_ctr(ctx);
      break;
    case Stage::evaluate:
      run_evaluate(ctx);
      break;
    case Stage::ablate:
      run_ablate(ctx);
      break;
  }
  return result;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e)) return 2;
  if (dynamic_cast<const UpstreamMissing*>(&e)) return 3;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return 4;
  return 1;
}

void validate_environment(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path work = cfg.work_dir();
  std::error_code ec;
  fs::create_directories(work, ec);
  if (ec) throw ConfigError("general.work_dir '" + work.string() + "' cannot be created: " + ec.message());
  const fs::path probe = work / ".hitlbm_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("general.work_dir '" + work.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace hitlbm::pipeline
