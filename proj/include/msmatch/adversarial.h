/*
 * Copyright 2026 The msmatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Adversarial negative sampling for answer selection.
//
// A discriminator D(A|Q) = sigmoid(f(Q, A)) separates relevant answers from
// negatives; a generator with its own scorer defines a softmax over a
// per-question candidate pool and samples the negatives D trains on. The
// generator cannot be differentiated through its sampling step, so it is
// updated with the likelihood-ratio (REINFORCE) estimator, using
// log(1 - D(A'|Q)) as the reward and last epoch's mean reward as baseline.

#ifndef MSMATCH_ADVERSARIAL_H_
#define MSMATCH_ADVERSARIAL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msmatch/adam.h"
#include "msmatch/corpus.h"
#include "msmatch/model.h"

namespace msm {

inline constexpr double kLogFloor = 1e-12;

enum class PoolSource { kLabeledNegative, kOtherThread };

struct AnswerRef {
  std::size_t thread = 0;
  std::size_t candidate = 0;

  bool operator==(const AnswerRef&) const = default;
};

struct CandidatePool {
  std::size_t thread = 0;
  std::vector<AnswerRef> answers;
  std::vector<PoolSource> sources;  // parallel to answers

  std::size_t size() const { return answers.size(); }
};

// Draws min(pool_size, available) answers uniformly without replacement
// from the question's labeled negatives plus every answer of
// `other_threads` (the question's own thread is skipped there). Throws
// CorpusError when nothing is eligible.
CandidatePool BuildPool(const Corpus& corpus, std::size_t thread,
                        std::size_t pool_size,
                        std::span<const std::size_t> other_threads,
                        nn::Rng& rng);

// True when no pool member is a labeled positive of the pool's question.
bool PoolExcludesPositives(const Corpus& corpus, const CandidatePool& pool);

// p_i = exp(s_i) / sum_j exp(s_j). ContractError on an empty input.
std::vector<double> GeneratorDistribution(std::span<const double> scores);

// Scores the pool with the generator in eval mode and applies the softmax.
std::vector<double> GeneratorDistribution(const Corpus& corpus,
                                          const CandidatePool& pool,
                                          MatchingModel& generator);

enum class SamplingMode {
  // Sequential draws without replacement, proportional to the remaining
  // probability mass.
  kStochastic,
  // The `count` most probable entries, ties to the lower index.
  kTopK,
};

// Returns `count` distinct indices into `probs`. Negative entries are
// clamped to zero; once the remaining mass is zero the rest are drawn
// uniformly. ContractError when count > probs.size().
std::vector<std::size_t> SampleNegatives(
    std::span<const double> probs, std::size_t count, nn::Rng& rng,
    SamplingMode mode = SamplingMode::kStochastic);

// r(A') = log(max(1 - D(A'|Q), 1e-12)).
double Reward(double discriminator_prob);

struct RewardBaseline {
  double value = 0.0;
  std::size_t count = 0;
};

struct DiscriminatorExample {
  const TokenIds* question = nullptr;
  const TokenIds* answer = nullptr;
  bool positive = false;
};

struct DiscriminatorBatch {
  std::vector<DiscriminatorExample> examples;
  // Loss is summed within a question and averaged over questions.
  std::size_t num_questions = 1;
};

// -sum_pos log D - sum_neg log(1 - D), divided by num_questions, plus
// l2 * sum ||W||^2 over the regularized weights.
nn::Tensor DiscriminatorLoss(MatchingModel& model,
                             const DiscriminatorBatch& batch,
                             const ForwardContext& ctx, double l2);

// One Adam update on the loss above (train mode). Returns the pre-update
// loss. DivergenceError when the loss or any gradient is not finite.
double DiscriminatorStep(MatchingModel& model, nn::Adam& optimizer,
                         const DiscriminatorBatch& batch, double l2,
                         nn::Rng& rng);

struct GeneratorExample {
  const TokenIds* question = nullptr;
  std::vector<const TokenIds*> pool;
  std::vector<std::size_t> sampled;  // indices into pool
  std::vector<double> rewards;       // parallel to sampled
};

// Mean over examples of (1/|sampled|) sum_s (r_s - baseline) log p(s), with
// log p under the full softmax over the pool; plus the L2 term. Its gradient
// is the baseline-corrected REINFORCE estimate.
nn::Tensor GeneratorSurrogate(MatchingModel& generator,
                              std::span<const GeneratorExample> examples,
                              double baseline, const ForwardContext& ctx,
                              double l2);

double GeneratorStep(MatchingModel& generator, nn::Adam& optimizer,
                     std::span<const GeneratorExample> examples,
                     double baseline, double l2, nn::Rng& rng);

struct TrainConfig {
  int epochs = 30;
  // Questions per parameter update.
  int batch_size = 4;
  // Negatives sampled per question (S).
  int neg_samples = 10;
  // Candidate pool size (P).
  int pool_size = 100;
  double learning_rate = 1e-4;
  double lr_decay = 5.0;
  int lr_decay_every = 10;
  double l2 = 1e-6;
  bool adversarial = true;
  SamplingMode sampling = SamplingMode::kStochastic;
  // Alternation schedule: discriminator epochs, then generator epochs, per
  // round. Learning rate and pools are per round.
  int discriminator_epochs = 1;
  int generator_epochs = 1;
  std::uint64_t seed = 1;
  // Exhaustively re-checks pool exclusion every round.
  bool debug_checks = false;
  bool evaluate = true;

  void Validate() const;
};

struct EpochLog {
  int epoch = 0;
  std::string phase;  // "discriminator" or "generator"
  double mean_loss = 0.0;
  std::optional<double> mean_reward;
  double baseline = 0.0;
  std::optional<double> dev_map;
  std::optional<double> dev_mrr;
  double learning_rate = 0.0;

  // Single-line JSON record.
  std::string ToJson() const;
};

struct TrainResult {
  MatchingModel discriminator;
  MatchingModel generator;
  std::vector<EpochLog> log;
};

// Split used for per-epoch metrics: dev when present, else test, else none.
std::optional<Split> HeldOutSplit(const Corpus& corpus);

// Trains discriminator and generator on the corpus's train split. The
// generator's initial weights come from model_config with seed + 1.
// `embeddings`, when given, is installed frozen in both models.
TrainResult Train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& config,
                  const std::optional<nn::Tensor>& embeddings = std::nullopt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace msm

#endif  // MSMATCH_ADVERSARIAL_H_
