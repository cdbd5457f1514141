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

// Multi-scale matching scorer f(Q, A).
//
// Each sentence is embedded (level 0) and passed through K convolution
// blocks (conv k=3 -> batchnorm -> relu -> maxpool), giving a hierarchy of
// representations whose level-k positions summarize a widening token window.
// For every scale pair (u, v) selected by the score mode, a two-layer
// comparison network is applied to all (question position, answer position)
// pairs; the results are max-pooled along each side, averaged, and
// concatenated into a match vector. An aggregator network maps the
// concatenated match vectors to the scalar score.

#ifndef MSMATCH_MODEL_H_
#define MSMATCH_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msmatch/corpus.h"
#include "msmatch/ops.h"

namespace msm {

enum class ScoreMode {
  kWordOnly,       // only (0,0)
  kWordPlusNgram,  // (0,0), (0,v) and (u,0)
  kFull,           // all (u,v)
};

std::string_view ScoreModeName(ScoreMode mode);
// Accepts "word", "multi" and "full".
ScoreMode ParseScoreMode(std::string_view name);

using ScalePair = std::pair<int, int>;

// Scale pairs in concatenation order. WordPlusNgram: (0,0), (0,1)..(0,K),
// (1,0)..(K,0). Full: lexicographic over 0..K.
std::vector<ScalePair> ScalePairs(ScoreMode mode, int levels);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;
  // Number of convolution blocks (K).
  int levels = 2;
  std::size_t channels = 128;
  std::size_t compare_hidden = 128;
  // Output width of every comparison network (h_dim).
  std::size_t match_dim = 128;
  std::size_t aggregate_hidden = 128;
  ScoreMode mode = ScoreMode::kWordPlusNgram;
  double dropout = 0.2;
  bool train_embeddings = true;
  std::uint64_t seed = 1;

  // Throws ConfigError describing the first invalid field.
  void Validate() const;
  // Width of level k: embed_dim at 0, channels above.
  std::size_t Width(int level) const;
};

struct ForwardContext {
  nn::Mode mode = nn::Mode::kEval;
  // Dropout stream; required in train mode when dropout > 0.
  nn::Rng* rng = nullptr;
};

// Levels 0..K of one sentence; level k is (width_k x ceil(m / 2^k)).
struct Hierarchy {
  std::vector<nn::Tensor> levels;
};

struct NamedTensor {
  std::string name;
  nn::Tensor tensor;
};

class MatchingModel {
 public:
  // Randomly initialized from config.seed. Each parameter draws from its own
  // stream keyed by its name, so shared parameters of differently sized
  // models start identical.
  explicit MatchingModel(ModelConfig config);

  MatchingModel(MatchingModel&&) noexcept = default;
  MatchingModel& operator=(MatchingModel&&) noexcept = default;
  MatchingModel(const MatchingModel&) = delete;
  MatchingModel& operator=(const MatchingModel&) = delete;

  // Deep copy: parameters, running statistics and config.
  MatchingModel Clone() const;

  const ModelConfig& config() const { return config_; }

  // Replaces the embedding table; `trainable` false freezes it.
  void SetEmbeddings(nn::Tensor table, bool trainable);

  // Highest encoder level the score mode reads.
  int LevelsUsed() const;

  // Encodes all sentences together; in train mode batchnorm statistics are
  // shared across the batch. Throws EmptySequenceError / VocabularyError.
  std::vector<Hierarchy> EncodeBatch(std::span<const TokenIds* const> sentences,
                                     const ForwardContext& ctx,
                                     int max_level = -1);
  Hierarchy Encode(const TokenIds& sentence, const ForwardContext& ctx,
                   int max_level = -1);

  // Match vector [h^Q, h^A] of length 2 * match_dim for representations
  // xq (width_u x m) and xa (width_v x n).
  nn::Tensor MatchPair(const nn::Tensor& xq, const nn::Tensor& xa, int u, int v,
                       const ForwardContext& ctx) const;

  // All match vectors of the score mode, in ScalePairs order.
  std::vector<nn::Tensor> MatchVectors(const Hierarchy& q, const Hierarchy& a,
                                       const ForwardContext& ctx) const;

  nn::Tensor ScoreEncoded(const Hierarchy& q, const Hierarchy& a,
                          const ForwardContext& ctx) const;
  nn::Tensor Score(const TokenIds& q, const TokenIds& a,
                   const ForwardContext& ctx);

  // Scores (question, answer) pairs with one shared encoder batch.
  std::vector<nn::Tensor> ScoreBatch(
      std::span<const std::pair<const TokenIds*, const TokenIds*>> pairs,
      const ForwardContext& ctx);

  // Eval-mode helpers that never record on a tape.
  double ScoreValue(const TokenIds& q, const TokenIds& a);
  std::vector<double> ScoreCandidates(const TokenIds& q,
                                      std::span<const TokenIds* const> answers);
  // sigma(f(Q, A)).
  double DiscriminatorProb(const TokenIds& q, const TokenIds& a);

  // Every parameter, frozen ones included, in a fixed order.
  std::vector<NamedTensor> Parameters() const;
  std::vector<nn::Tensor> TrainableParameters() const;
  // Weight matrices and kernels: the L2-penalized subset.
  std::vector<nn::Tensor> RegularizedParameters() const;
  // Batchnorm running statistics as named tensors (copies).
  std::vector<NamedTensor> Buffers() const;
  // Overwrites a parameter or buffer by name; throws on unknown name or
  // shape mismatch.
  void Assign(const std::string& name, std::span<const double> values,
              const nn::Shape& shape);

  std::size_t NumParameters() const;

 private:
  struct ConvBlock {
    nn::Tensor weight;  // (C_out x C_in x 3)
    nn::Tensor bias;
    nn::Tensor gamma;
    nn::Tensor beta;
    nn::BatchNormState<double> stats;
  };
  struct Mlp {
    nn::Tensor w1, b1, w2, b2;
  };

  void CheckTokens(const TokenIds& sentence) const;
  nn::Tensor Aggregate(std::span<const nn::Tensor> match_vectors,
                       const ForwardContext& ctx) const;

  ModelConfig config_;
  std::vector<ScalePair> pairs_;
  nn::Tensor embedding_;
  bool embedding_trainable_ = true;
  std::vector<ConvBlock> blocks_;
  std::vector<Mlp> compare_;  // parallel to pairs_
  Mlp aggregate_;
};

}  // namespace msm

#endif  // MSMATCH_MODEL_H_
