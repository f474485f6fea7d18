// Copyright 2026 The poirec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "poirec/eval.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/parallel.hpp"

namespace poirec {

Split group_split(const std::vector<UserSequence>& sequences, const SplitConfig& config) {
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
  const std::size_t U = sequences.size();
  if (U < 2) throw ValidationError("group split needs at least two users");
  auto n_train = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(U)));
  n_train = std::clamp<std::size_t>(n_train, 1, U - 1);

  std::vector<std::size_t> order(U);
  for (std::size_t i = 0; i < U; ++i) order[i] = i;
  Rng rng = substream(config.seed, "split");
  shuffle(order, rng);
  std::vector<bool> is_train(U, false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;

  Split out;
  for (std::size_t i = 0; i < U; ++i) {
    (is_train[i] ? out.train : out.test).push_back(sequences[i]);
  }
  return out;
}

RankMetrics metrics_for_rank(std::size_t r, std::size_t n) {
  if (n < 2 || r < 1 || r > n) throw ValidationError("rank outside 1..|P| or |P| < 2");
  RankMetrics m;
  const double dcg = 1.0 / std::log2(static_cast<double>(r) + 1.0);
  m.recall10 = r <= 10 ? 1.0 : 0.0;
  m.recall50 = r <= 50 ? 1.0 : 0.0;
  m.ndcg10 = r <= 10 ? dcg : 0.0;
  m.ndcg50 = r <= 50 ? dcg : 0.0;
  m.mrr = 1.0 / static_cast<double>(r);
  m.auc = static_cast<double>(n - r) / static_cast<double>(n - 1);
  return m;
}

std::size_t target_rank(const std::vector<double>& scores, const std::vector<std::string>& ids,
                        std::size_t target) {
  const double s = scores[target];
  const std::string& id = ids[target];
  std::size_t r = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && ids[i] < id)) ++r;
  }
  return r;
}

MetricsReport MetricsReport::from_ranks(const std::vector<std::size_t>& ranks, std::size_t n) {
  MetricsReport rep;
  rep.n_candidates = n;
  rep.n_sequences = ranks.size();
  if (ranks.empty()) return rep;
  for (std::size_t r : ranks) {
    const RankMetrics m = metrics_for_rank(r, n);
    rep.ndcg10 += m.ndcg10;
    rep.ndcg50 += m.ndcg50;
    rep.recall10 += m.recall10;
    rep.recall50 += m.recall50;
    rep.mrr += m.mrr;
    rep.auc += m.auc;
  }
  const double k = static_cast<double>(ranks.size());
  for (double* v : {&rep.ndcg10, &rep.ndcg50, &rep.recall10, &rep.recall50, &rep.mrr, &rep.auc}) {
    *v /= k;
  }
  return rep;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["ndcg@10"] = ndcg10;
  j["ndcg@50"] = ndcg50;
  j["recall@10"] = recall10;
  j["recall@50"] = recall50;
  j["mrr"] = mrr;
  j["auc"] = auc;
  j["n_sequences"] = n_sequences;
  j["n_candidates"] = n_candidates;
  j["missing_targets"] = missing_targets;
  return j.dump();
}

MetricsReport evaluate(const std::vector<UserSequence>& test,
                       const std::map<std::string, TokenizedItem>& items, const ItemIndex& index,
                       const ModelParams<float>& params, const EvalOptions& options) {
  if (index.size() < 2) throw ValidationError("evaluation needs at least two candidates");
  std::vector<std::size_t> ranks(test.size());
  std::vector<char> missing(test.size(), 0);
  parallel_for(test.size(), options.threads, [&](std::size_t i) {
    const auto& s = test[i];
    if (s.items.size() < kMinSequenceLength) {
      throw ValidationError("test sequence of " + s.user_id + " is shorter than 2");
    }
    std::vector<std::string> prefix;
    for (std::size_t k = 0; k + 1 < s.items.size(); ++k) prefix.push_back(s.items[k].venue_id);
    const std::string& target = s.items.back().venue_id;
    const Ranking ranking = rank(prefix, items, index, params, {std::nullopt, options.exclude_seen});
    std::size_t r = 0;
    for (std::size_t k = 0; k < ranking.size(); ++k) {
      if (ranking[k].venue_id == target) {
        r = k + 1;
        break;
      }
    }
    if (r == 0) {
      if (options.missing_target_is_error) {
        throw LookupMiss("target " + target + " of " + s.user_id + " is not a candidate");
      }
      missing[i] = 1;
      r = index.size();
    }
    ranks[i] = r;
  });
  MetricsReport rep = MetricsReport::from_ranks(ranks, index.size());
  for (char m : missing) rep.missing_targets += static_cast<std::size_t>(m);
  if (rep.missing_targets > 0) {
    std::cerr << "warning: " << rep.missing_targets
              << " evaluation targets were not candidates; counted at rank |P|\n";
  }
  return rep;
}

MetricsReport random_baseline(std::size_t n_sequences, std::size_t n_candidates,
                              std::uint64_t seed) {
  if (n_candidates < 2) throw ValidationError("random baseline needs |P| >= 2");
  Rng rng = substream(seed, "random-baseline");
  std::vector<std::size_t> ranks(n_sequences);
  for (auto& r : ranks) r = 1 + uniform_index(rng, n_candidates);
  return MetricsReport::from_ranks(ranks, n_candidates);
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t w = 13;
  for (const auto& [label, m] : rows) w = std::max(w, label.size() + 1);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %9s %9s %9s %9s %9s %9s\n", static_cast<int>(w),
                "Arm", "nDCG@10", "nDCG@50", "Recall@10", "Recall@50", "MRR", "AUC");
  out += buf;
  for (const auto& [label, m] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %9.4f %9.4f %9.4f %9.4f %9.4f %9.3f\n",
                  static_cast<int>(w), label.c_str(), m.ndcg10, m.ndcg50, m.recall10,
                  m.recall50, m.mrr, m.auc);
    out += buf;
  }
  return out;
}

}  // namespace poirec
