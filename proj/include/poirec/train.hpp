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

#ifndef POIREC_TRAIN_HPP_
#define POIREC_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poirec/domain.hpp"
#include "poirec/model.hpp"
#include "poirec/rank.hpp"
#include "poirec/textrep.hpp"

namespace poirec {

struct TrainConfig {
  int batch_size = 16;
  int pretrain_epochs = 2;
  int finetune_epochs = 4;  // upper bound per finetuning stage
  double learning_rate = 1e-3;
  int warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double max_grad_norm = 0.0;  // 0 disables clipping
  double mask_prob = 0.15;
  double temperature = 0.05;
  double lambda = 1.0;  // weight of the contrastive loss in pretraining
  int patience = 1;
  double validation_fraction = 0.1;
  // (prefix, next item) pairs drawn per user and epoch; 0 uses every cut.
  int pairs_per_user = 0;
  std::uint64_t seed = 0;
  int threads = 1;

  // Throws ConfigError.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Objectives

struct MaskedInput {
  ModelInput input;
  std::vector<int> positions;     // masked token positions
  std::vector<TokenId> targets;   // original ids at those positions
};

// Selects each value token independently with probability mask_prob; CLS,
// PAD and key tokens are never selected. Of the selected tokens 80% become
// MASK, 10% a random non-special token and 10% stay unchanged.
MaskedInput mask_tokens(const ModelInput& input, double mask_prob, int vocab_size,
                        Rng& rng);

template <typename Scalar>
struct ContrastiveResult {
  Scalar loss = 0;
  Matrix<Scalar> d_queries;     // B x d
  Matrix<Scalar> d_candidates;  // N x d
};

// Mean cross-entropy of softmax(q_i . c_j / tau) against column targets[i].
// With empty `targets`, row i's positive is column i (in-batch negatives)
// and B >= 2 is required. Inputs must be unit rows.
template <typename Scalar>
ContrastiveResult<Scalar> contrastive_loss(const Matrix<Scalar>& queries,
                                           const Matrix<Scalar>& candidates,
                                           Scalar temperature,
                                           const std::vector<int>& targets = {});

// One pretraining example: a masked prefix and its next item.
struct PretrainExample {
  MaskedInput sequence;
  ModelInput item;
};

struct LossBreakdown {
  double total = 0.0;
  double mlm = 0.0;
  double contrastive = 0.0;
  std::size_t masked_tokens = 0;
};

// L = mean MLM cross-entropy over all masked tokens of the batch
//   + lambda * in-batch contrastive loss (skipped when lambda == 0).
// Adds the gradient to `grads` when given. Per-example gradients are summed
// in batch order, so the result does not depend on `threads`.
template <typename Scalar>
LossBreakdown pretrain_loss(const ModelParams<Scalar>& params,
                            const std::vector<PretrainExample>& batch,
                            const TrainConfig& config, ModelParams<Scalar>* grads,
                            bool train_mode, std::uint64_t dropout_seed);

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(const ModelParams<float>& params, const TrainConfig& config);

  // Learning rate ramps linearly over warmup_steps, then stays constant.
  double current_lr() const;
  void step(ModelParams<float>& params, const ModelParams<float>& grads);
  long steps() const { return t_; }

 private:
  TrainConfig config_;
  ModelParams<float> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Runs

struct TrainingSet {
  std::map<std::string, TokenizedItem> items;
  std::vector<UserSequence> sequences;
};

struct EpochRecord {
  std::string phase;  // "pretrain", "stage1", "stage2"
  int epoch = 0;
  std::optional<double> mlm;
  std::optional<double> contrastive;
  std::optional<double> total;
  std::optional<double> validation_ndcg10;
  std::size_t steps = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch_stage1 = 0;
  int best_epoch_stage2 = 0;
  double best_validation_ndcg10 = 0.0;
  double wall_seconds = 0.0;

  // One JSON object per epoch, then a summary record.
  void write_jsonl(std::ostream& out) const;
};

// (prefix, next item) cut points for an epoch, in training order.
struct Pair {
  std::size_t sequence = 0;
  std::size_t cut = 0;  // prefix = items[0, cut), target = items[cut]
};
std::vector<Pair> sample_pairs(const std::vector<UserSequence>& sequences,
                               int pairs_per_user, Rng& rng);

// Throws TrainingError on non-finite losses or gradients.
TrainReport pretrain(const TrainingSet& data, ModelParams<float>& params,
                     const TrainConfig& config);

struct FinetuneResult {
  ModelParams<float> params;
  ItemIndex index;                  // encoded by stage1_params, frozen in stage 2
  ModelParams<float> stage1_params;
  TrainReport report;
  double pretrained_validation_ndcg10 = 0.0;
};

// Holds out the last validation_fraction of `data.sequences` for snapshot
// selection. ConfigError when that leaves no validation or training users.
FinetuneResult finetune_two_stage(const TrainingSet& data,
                                  const ModelParams<float>& pretrained,
                                  const TrainConfig& config);

// Mean nDCG@10 of leave-last-out prediction against `index`.
double validation_ndcg10(const std::vector<UserSequence>& sequences,
                         const std::map<std::string, TokenizedItem>& items,
                         const ItemIndex& index, const ModelParams<float>& params,
                         int threads);

}  // namespace poirec

#endif  // POIREC_TRAIN_HPP_
