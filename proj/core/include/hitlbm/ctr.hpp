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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlbm/behavior.hpp"
#include "hitlbm/fusion.hpp"
#include "hitlbm/nn/mlp.hpp"
#include "hitlbm/nn/params.hpp"

namespace hitlbm::ctr {

using nn::Matrix;
using nn::Vector;

struct CtrSample {
  std::string user_id;
  std::string item_id;
  std::vector<std::string> recent_item_ids;  // oldest first, at most W
  int label = 0;
  std::optional<Vector> e_user;
  std::optional<Vector> e_item;
};

nlohmann::json to_json(const CtrSample& s, bool test);
CtrSample ctr_sample_from_json(const nlohmann::json& j, bool* test = nullptr);

struct SampleSplit {
  std::vector<CtrSample> train;
  std::vector<CtrSample> test;
};

/// One sample per interaction; recent items are the user's previous `window`
/// interactions across both splits, liked or not.
SampleSplit build_samples(const std::vector<behavior::Interaction>& train, const std::vector<behavior::Interaction>& test,
                          std::size_t window = 10);

struct CtrConfig {
  std::size_t d_id = 16;
  std::size_t side_dim = 64;
  bool use_e_user = false;
  bool use_e_item = false;
  std::vector<std::size_t> hidden{64, 32};

  std::size_t input_dim() const;
};

/// Embedding tables for users and items plus an MLP over
/// [user, mean(recent items), target item, e_user?, e_item?].
/// Unknown ids map to zero vectors.
class CtrModel {
 public:
  CtrModel() = default;
  /// Builds vocabularies from `train`.
  CtrModel(CtrConfig cfg, const std::vector<CtrSample>& train);

  void init(Rng& rng);

  const CtrConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const nn::Mlp& mlp() const { return mlp_; }

  Vector assemble_features(const CtrSample& s) const;
  Matrix features(std::span<const CtrSample> batch) const;

  /// Logits, with an optional cache for backward().
  Vector logits(std::span<const CtrSample> batch, nn::Mlp::Cache* cache = nullptr) const;
  Vector predict(std::span<const CtrSample> batch) const;

  struct SideGrads {
    Matrix d_user;  // rows x side_dim, empty when use_e_user is off
    Matrix d_item;
  };

  /// Accumulates gradients of all CTR parameters and returns the gradient
  /// w.r.t. the side vectors.
  SideGrads backward(std::span<const CtrSample> batch, const nn::Mlp::Cache& cache, std::span<const double> dlogits);

  nlohmann::json to_json() const;
  static CtrModel from_json(const nlohmann::json& j);

 private:
  std::optional<std::size_t> user_row(const std::string& id) const;
  std::optional<std::size_t> item_row(const std::string& id) const;

  CtrConfig cfg_;
  std::map<std::string, std::size_t> users_;
  std::map<std::string, std::size_t> items_;
  nn::Mlp mlp_;
  nn::ParamStore params_;
};

struct CtrHyper {
  double lr = 2e-3;
  std::size_t epochs = 4;
  std::size_t batch = 256;
  std::uint64_t seed = 1;
};

struct CtrTrainReport {
  std::vector<double> epoch_loss;  // full training loss before each epoch
  double final_loss = 0.0;
};

/// Minibatch BCE training with side vectors taken from the samples.
/// Throws TrainingError on single-class data.
CtrModel train_ctr(const std::vector<CtrSample>& train, const CtrConfig& cfg, const CtrHyper& hyper,
                   CtrTrainReport* report = nullptr);

struct Metrics {
  std::optional<double> auc;  // empty when the labels have a single class
  double logloss = 0.0;
  std::size_t n = 0;
};

Metrics evaluate(const CtrModel& model, const std::vector<CtrSample>& test);

/// Interests of one user in path order with their fusion weights.
struct UserInterests {
  Matrix e;
  Vector scores;
};

/// Everything the fusion stack needs: encoded interests per user and encoded
/// item knowledge per item.
struct SideInputs {
  std::map<std::string, UserInterests> users;
  std::map<std::string, Vector> items;
};

/// CTR model and fusion parameters trained together; fusion parameters live
/// in model.params() under "fusion/".
struct JointModel {
  CtrModel ctr;
  fusion::FusionModel fusion;
};

/// Loss of one user's batch; with `with_grad` gradients of every parameter
/// (CTR and fusion) are accumulated into joint.ctr.params().
double joint_batch_loss(JointModel& joint, const SideInputs& side, const std::string& user_id,
                        std::span<const CtrSample> batch, bool with_grad);

/// Trains fusion and CTR jointly, one user's samples per step.
JointModel train_joint(const std::vector<CtrSample>& train, const SideInputs& side, const fusion::FusionConfig& fcfg,
                       const CtrConfig& cfg, const CtrHyper& hyper, CtrTrainReport* report = nullptr);

/// Fills e_user / e_item of every sample from the (frozen) fusion stack.
/// Users without interests get a zero e_user.
void attach_side_info(std::vector<CtrSample>& samples, const fusion::FusionModel& fusion,
                      const nn::ParamStore& params, const SideInputs& side);

// ---- ablation ---------------------------------------------------------------

enum class InterestSource { none, cascade, search };

struct AblationRung {
  std::string name;
  InterestSource source = InterestSource::none;
  fusion::Variant variant = fusion::Variant::tif;
  bool unit_scores = false;  // fuse with every score set to 1
};

/// base, +CUBE, +CUBE+TIF, +CUBE+TIF+HTS and, optionally, the MLP / SA / TIF
/// fusion variants over the searched path.
std::vector<AblationRung> ablation_rungs(bool fusion_variants);

struct AblationInputs {
  std::vector<CtrSample> train;
  std::vector<CtrSample> test;
  std::optional<SideInputs> cascade;  // interests from the plain cascade pass
  std::optional<SideInputs> search;   // interests from the searched path
};

struct AblationOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool fusion_variants = false;
  CtrConfig ctr;
  CtrHyper hyper;
  fusion::CrossMode cross_mode = fusion::CrossMode::item_query;
};

struct AblationRow {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<Metrics> metrics;  // empty: skipped
  std::string skip_reason;
};

std::vector<AblationRow> run_ablation(const AblationInputs& inputs, const AblationOptions& opts);

/// {"rows": [{"name", "auc", "logloss", "seed"}]}; skipped rungs carry
/// "skipped": true and a reason instead of metrics.
nlohmann::json ablation_report(const std::vector<AblationRow>& rows);

}  // namespace hitlbm::ctr
