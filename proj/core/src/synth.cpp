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

#include "hitlbm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "hitlbm/error.hpp"
#include "hitlbm/rng.hpp"
#include "hitlbm/vocab.hpp"

namespace hitlbm::synth {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n_categories < 2) throw ConfigError("synth: n_categories must be >= 2");
  if (n_items < n_categories) throw ConfigError("synth: n_items must be >= n_categories");
  if (n_users == 0) throw ConfigError("synth: n_users must be >= 1");
  if (chunks_per_user == 0 || chunk_len == 0) throw ConfigError("synth: chunks_per_user and chunk_len must be >= 1");
  if (!(noise >= 0.0 && noise < 0.5)) throw ConfigError("synth: noise must lie in [0, 0.5)");
  if (drift.kind == DriftKind::switch_at && drift.switch_chunk < 1) {
    throw ConfigError("synth: switch chunk must be >= 1");
  }
  if (drift.kind == DriftKind::random_walk && !(drift.sigma >= 0.0)) throw ConfigError("synth: sigma must be >= 0");
  if (!(preference_skew >= 0.0)) throw ConfigError("synth: preference_skew must be >= 0");
}

namespace {

std::string padded(const char* prefix, std::size_t v, int width) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, v);
  return buf;
}

std::vector<double> zipf_prior(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  return w;
}

std::vector<double> one_hot(std::size_t n, std::size_t k) {
  std::vector<double> v(n, 0.0);
  v[k] = 1.0;
  return v;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (double& x : p) x /= z;
  return p;
}

std::vector<std::vector<double>> user_trace(const SynthConfig& cfg, Rng& rng) {
  const std::size_t nc = cfg.n_categories;
  std::vector<double> prior = zipf_prior(nc, cfg.preference_skew);
  std::vector<std::vector<double>> dists;
  if (cfg.drift.kind == DriftKind::switch_at) {
    const std::size_t first = rng.categorical(prior);
    std::vector<double> rest = prior;
    rest[first] = 0.0;
    const std::size_t second = rng.categorical(rest);
    for (std::size_t c = 1; c <= cfg.chunks_per_user; ++c) {
      dists.push_back(one_hot(nc, c < cfg.drift.switch_chunk ? first : second));
    }
  } else {
    std::vector<double> logits(nc);
    for (std::size_t i = 0; i < nc; ++i) logits[i] = std::log(prior[i]) + rng.normal();
    for (std::size_t c = 1; c <= cfg.chunks_per_user; ++c) {
      if (c > 1) {
        for (double& l : logits) l += cfg.drift.sigma * rng.normal();
      }
      dists.push_back(softmax(logits));
    }
  }
  return dists;
}

// Categories a user does not currently prefer: those below uniform mass, or
// everything except the mode when nothing is.
std::vector<std::size_t> non_preferred(const std::vector<double>& dist) {
  const double uniform = 1.0 / static_cast<double>(dist.size());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] < uniform) out.push_back(i);
  }
  if (out.empty()) {
    const auto mode = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (i != mode) out.push_back(i);
    }
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  std::vector<std::vector<std::size_t>> items_of(cfg.n_categories);
  for (std::size_t j = 0; j < cfg.n_items; ++j) {
    CatalogItem item{padded("i", j, 5), padded("Item ", j, 5), j % cfg.n_categories};
    items_of[item.category].push_back(j);
    ds.catalog.push_back(std::move(item));
  }

  const std::size_t n_pos = (cfg.chunk_len + 1) / 2;
  constexpr std::int64_t kEpoch = 1'000'000;
  constexpr std::int64_t kSlotSeconds = 3600;

  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    Rng rng(mix_seed(cfg.seed, u));
    GroundTruthTrace trace{padded("u", u, 4), user_trace(cfg, rng)};
    for (std::size_t c = 0; c < cfg.chunks_per_user; ++c) {
      const auto& dist = trace.per_chunk_dist[c];
      const std::vector<std::size_t> negatives = non_preferred(dist);
      std::vector<int> labels(cfg.chunk_len, 0);
      std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
      rng.shuffle(labels);
      for (std::size_t k = 0; k < cfg.chunk_len; ++k) {
        std::size_t category;
        if (labels[k] == 1) {
          category = rng.bernoulli(cfg.noise) ? rng.index(cfg.n_categories) : rng.categorical(dist);
        } else {
          category = negatives[rng.index(negatives.size())];
        }
        const auto& pool = items_of[category];
        const CatalogItem& item = ds.catalog[pool[rng.index(pool.size())]];
        behavior::Interaction x;
        x.user_id = trace.user_id;
        x.item_id = item.item_id;
        x.title = item.title;
        x.attrs = {{"category", vocab::category_token(item.category)}};
        x.rating = labels[k] == 1 ? 5.0 : static_cast<double>(1 + rng.index(3));
        x.label = labels[k];
        const auto slot = static_cast<std::int64_t>(c * cfg.chunk_len + k);
        x.ts = kEpoch + slot * kSlotSeconds + static_cast<std::int64_t>(u);
        ds.interactions.push_back(std::move(x));
      }
    }
    ds.traces.push_back(std::move(trace));
  }
  return ds;
}

double ground_truth_overlap(const std::string& interest_text, const GroundTruthTrace& trace, std::size_t chunk_index) {
  if (chunk_index < 1 || chunk_index > trace.per_chunk_dist.size()) {
    throw PreconditionError("ground_truth_overlap: chunk " + std::to_string(chunk_index) + " outside trace of " +
                            std::to_string(trace.per_chunk_dist.size()) + " chunks");
  }
  const auto& dist = trace.per_chunk_dist[chunk_index - 1];
  double mass = 0.0;
  for (const auto& tok : vocab::extract_category_tokens(interest_text)) {
    const std::size_t idx = *vocab::category_index(tok);
    if (idx < dist.size()) mass += dist[idx];
  }
  return std::min(mass, 1.0);
}

json interaction_record(const behavior::Interaction& x) {
  return json{{"user_id", x.user_id}, {"item_id", x.item_id}, {"title", x.title},
              {"attrs", x.attrs},     {"rating", x.rating},   {"ts", x.ts}};
}

std::vector<json> ground_truth_records(const GroundTruthTrace& trace) {
  std::vector<json> out;
  for (std::size_t c = 0; c < trace.per_chunk_dist.size(); ++c) {
    out.push_back(json{{"user_id", trace.user_id}, {"chunk_index", c + 1}, {"dist", trace.per_chunk_dist[c]}});
  }
  return out;
}

std::vector<GroundTruthTrace> traces_from_records(const std::vector<json>& records) {
  std::map<std::string, std::map<std::size_t, std::vector<double>>> by_user;
  for (const auto& r : records) {
    by_user[r.at("user_id").get<std::string>()][r.at("chunk_index").get<std::size_t>()] =
        r.at("dist").get<std::vector<double>>();
  }
  std::vector<GroundTruthTrace> out;
  for (auto& [uid, chunks] : by_user) {
    GroundTruthTrace t{uid, {}};
    for (auto& [idx, dist] : chunks) {
      if (idx != t.per_chunk_dist.size() + 1) throw ParseError("ground truth for " + uid + " is not contiguous", 0);
      t.per_chunk_dist.push_back(std::move(dist));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace hitlbm::synth
