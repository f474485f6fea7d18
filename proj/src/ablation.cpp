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

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "poirec/eval.hpp"

namespace poirec {

namespace {

AblationArm run_arm(const Corpus& corpus, const Split& split, const AblationConfig& config,
                    bool with_desc, const std::string& label) {
  const std::map<std::string, PoiMeta> pois = arm_pois(corpus, with_desc);
  const Vocab vocab = arm_vocab(pois, config);

  TrainingSet data;
  data.items = tokenize_pois(pois, vocab, config.budgets.per_attribute, true);
  data.sequences = split.train;
  ModelParams<float> params = ModelParams<float>::init(arm_model_config(config, vocab.size()));

  AblationArm arm;
  arm.label = label;
  arm.vocab_size = vocab.size();
  arm.pretrain_report = pretrain(data, params, config.train);
  FinetuneResult ft = finetune_two_stage(data, params, config.train);
  arm.finetune_report = std::move(ft.report);
  arm.metrics = evaluate(split.test, data.items, ft.index, ft.params, config.eval);
  return arm;
}

std::string ratio(double a, double b) {
  if (b == 0.0) return a == 0.0 ? "n/a" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", a / b);
  return buf;
}

}  // namespace

std::map<std::string, PoiMeta> arm_pois(const Corpus& corpus, bool with_desc) {
  std::map<std::string, PoiMeta> pois;
  for (const auto& [id, meta] : corpus.pois) {
    pois.emplace(id, with_desc ? meta : meta.without(attr::kDesc));
  }
  return pois;
}

Vocab arm_vocab(const std::map<std::string, PoiMeta>& pois, const AblationConfig& config) {
  std::vector<std::string> texts;
  for (const auto& [id, meta] : pois) texts.push_back(item_text(meta));
  return build_vocab(texts, config.max_vocab, config.min_freq);
}

ModelConfig arm_model_config(const AblationConfig& config, std::size_t vocab_size) {
  ModelConfig mc = config.model;
  mc.vocab_size = static_cast<int>(vocab_size);
  mc.max_tokens = static_cast<int>(config.budgets.per_sequence);
  return mc;
}

AblationConfig desk_scale_ablation(std::uint64_t seed) {
  AblationConfig c;
  c.model.d_model = 64;
  c.model.d_ff = 256;
  c.model.seed = seed;
  c.budgets.per_sequence = 128;
  c.budgets.per_attribute = 32;
  c.train.pretrain_epochs = 8;
  c.train.finetune_epochs = 4;
  c.train.learning_rate = 3e-3;
  c.train.patience = 2;
  c.train.pairs_per_user = 10;
  c.train.seed = seed;
  c.split.seed = seed;
  return c;
}

AblationReport run_ablation(const Corpus& corpus, const AblationConfig& config) {
  config.train.validate();
  const Split split = group_split(corpus.sequences, config.split);
  AblationReport report;
  report.train_users = split.train.size();
  report.test_users = split.test.size();
  report.with_desc = run_arm(corpus, split, config, !config.no_desc_both, "With");
  report.without_desc = run_arm(corpus, split, config, false, "Without");
  return report;
}

std::string AblationReport::to_json() const {
  nlohmann::ordered_json j;
  j["train_users"] = train_users;
  j["test_users"] = test_users;
  for (const AblationArm* arm : {&with_desc, &without_desc}) {
    nlohmann::ordered_json a = nlohmann::ordered_json::parse(arm->metrics.to_json());
    a["vocab_size"] = arm->vocab_size;
    j[arm == &with_desc ? "with_desc" : "without_desc"] = a;
  }
  return j.dump(2) + "\n";
}

std::string AblationReport::to_table() const {
  std::string out = format_metrics_table(
      {{with_desc.label, with_desc.metrics}, {without_desc.label, without_desc.metrics}});
  const MetricsReport& a = with_desc.metrics;
  const MetricsReport& b = without_desc.metrics;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-13s %9s %9s %9s %9s %9s %9s\n", "With/Without",
                ratio(a.ndcg10, b.ndcg10).c_str(), ratio(a.ndcg50, b.ndcg50).c_str(),
                ratio(a.recall10, b.recall10).c_str(), ratio(a.recall50, b.recall50).c_str(),
                ratio(a.mrr, b.mrr).c_str(), ratio(a.auc, b.auc).c_str());
  return out + buf;
}

}  // namespace poirec
