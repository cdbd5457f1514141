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

#include "msmatch/model.h"

#include <cmath>
#include <map>

#include "msmatch/embeddings.h"
#include "msmatch/error.h"

namespace msm {

namespace {

using nn::Tensor;

std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

nn::Rng StreamFor(std::uint64_t seed, std::string_view name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(Fnv1a(name)),
                    static_cast<std::uint32_t>(Fnv1a(name) >> 32)};
  return nn::Rng(seq);
}

Tensor Xavier(std::uint64_t seed, const std::string& name, nn::Shape shape,
              std::size_t fan_in, std::size_t fan_out) {
  nn::Rng rng = StreamFor(seed, name);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  std::vector<double> values(nn::NumElements(shape));
  for (double& v : values) v = uniform(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor ZerosParam(std::size_t n) { return Tensor::Zeros({n}, true); }

std::string PairName(const ScalePair& p) {
  return "compare" + std::to_string(p.first) + "_" + std::to_string(p.second);
}

}  // namespace

std::string_view ScoreModeName(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kWordOnly:
      return "word";
    case ScoreMode::kWordPlusNgram:
      return "multi";
    case ScoreMode::kFull:
      return "full";
  }
  return "multi";
}

ScoreMode ParseScoreMode(std::string_view name) {
  if (name == "word") return ScoreMode::kWordOnly;
  if (name == "multi") return ScoreMode::kWordPlusNgram;
  if (name == "full") return ScoreMode::kFull;
  throw ConfigError("unknown score mode \"" + std::string(name) +
                    "\" (expected word, multi or full)");
}

std::vector<ScalePair> ScalePairs(ScoreMode mode, int levels) {
  std::vector<ScalePair> pairs;
  switch (mode) {
    case ScoreMode::kWordOnly:
      pairs.emplace_back(0, 0);
      break;
    case ScoreMode::kWordPlusNgram:
      for (int v = 0; v <= levels; ++v) pairs.emplace_back(0, v);
      for (int u = 1; u <= levels; ++u) pairs.emplace_back(u, 0);
      break;
    case ScoreMode::kFull:
      for (int u = 0; u <= levels; ++u) {
        for (int v = 0; v <= levels; ++v) pairs.emplace_back(u, v);
      }
      break;
  }
  return pairs;
}

void ModelConfig::Validate() const {
  if (vocab_size < 1) throw ConfigError("vocab_size must be positive");
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (levels < 0) throw ConfigError("levels must be non-negative");
  if (channels < 1 || compare_hidden < 1 || match_dim < 1 ||
      aggregate_hidden < 1) {
    throw ConfigError("layer widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
}

std::size_t ModelConfig::Width(int level) const {
  return level == 0 ? embed_dim : channels;
}

MatchingModel::MatchingModel(ModelConfig config) : config_(std::move(config)) {
  config_.Validate();
  pairs_ = ScalePairs(config_.mode, config_.levels);
  const std::uint64_t seed = config_.seed;
  {
    nn::Rng rng = StreamFor(seed, "embedding");
    embedding_ = RandomEmbeddings(config_.vocab_size, config_.embed_dim, rng);
    embedding_trainable_ = config_.train_embeddings;
    embedding_.set_requires_grad(embedding_trainable_);
  }
  for (int k = 1; k <= config_.levels; ++k) {
    const std::string prefix = "block" + std::to_string(k);
    const std::size_t cin = config_.Width(k - 1), cout = config_.channels;
    ConvBlock block;
    block.weight = Xavier(seed, prefix + ".conv.weight", {cout, cin, 3},
                          cin * 3, cout * 3);
    block.bias = ZerosParam(cout);
    block.gamma = Tensor::Filled({cout}, 1.0, true);
    block.beta = ZerosParam(cout);
    block.stats = nn::BatchNormState<double>(cout);
    blocks_.push_back(std::move(block));
  }
  for (const ScalePair& p : pairs_) {
    const std::string prefix = PairName(p);
    const std::size_t in = config_.Width(p.first) + config_.Width(p.second);
    Mlp mlp;
    mlp.w1 = Xavier(seed, prefix + ".w1", {in, config_.compare_hidden}, in,
                    config_.compare_hidden);
    mlp.b1 = ZerosParam(config_.compare_hidden);
    mlp.w2 = Xavier(seed, prefix + ".w2",
                    {config_.compare_hidden, config_.match_dim},
                    config_.compare_hidden, config_.match_dim);
    mlp.b2 = ZerosParam(config_.match_dim);
    compare_.push_back(std::move(mlp));
  }
  const std::size_t agg_in = 2 * config_.match_dim * pairs_.size();
  aggregate_.w1 =
      Xavier(seed, "aggregate.w1", {agg_in, config_.aggregate_hidden}, agg_in,
             config_.aggregate_hidden);
  aggregate_.b1 = ZerosParam(config_.aggregate_hidden);
  aggregate_.w2 = Xavier(seed, "aggregate.w2", {config_.aggregate_hidden, 1},
                         config_.aggregate_hidden, 1);
  aggregate_.b2 = ZerosParam(1);
}

MatchingModel MatchingModel::Clone() const {
  MatchingModel copy(config_);
  copy.SetEmbeddings(embedding_.Clone(), embedding_trainable_);
  for (const NamedTensor& p : Parameters()) {
    copy.Assign(p.name, p.tensor.data(), p.tensor.shape());
  }
  for (const NamedTensor& b : Buffers()) {
    copy.Assign(b.name, b.tensor.data(), b.tensor.shape());
  }
  return copy;
}

void MatchingModel::SetEmbeddings(Tensor table, bool trainable) {
  if (table.shape() != nn::Shape{config_.vocab_size, config_.embed_dim}) {
    throw DimensionError("embedding table " + nn::ShapeString(table.shape()) +
                         " does not match vocab " +
                         std::to_string(config_.vocab_size) + " x dim " +
                         std::to_string(config_.embed_dim));
  }
  embedding_ = std::move(table);
  embedding_trainable_ = trainable;
  config_.train_embeddings = trainable;
  embedding_.set_requires_grad(trainable);
}

int MatchingModel::LevelsUsed() const {
  int top = 0;
  for (const ScalePair& p : pairs_) top = std::max({top, p.first, p.second});
  return top;
}

void MatchingModel::CheckTokens(const TokenIds& sentence) const {
  if (sentence.empty())
    throw EmptySequenceError("cannot encode empty sentence");
  for (std::int32_t id : sentence) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) +
                            " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
    }
  }
}

std::vector<Hierarchy> MatchingModel::EncodeBatch(
    std::span<const TokenIds* const> sentences, const ForwardContext& ctx,
    int max_level) {
  const int top =
      max_level < 0 ? config_.levels : std::min(max_level, config_.levels);
  std::vector<Hierarchy> out(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    CheckTokens(*sentences[i]);
    out[i].levels.push_back(
        nn::Transpose(nn::GatherRows(embedding_, *sentences[i])));
  }
  for (int k = 1; k <= top; ++k) {
    ConvBlock& block = blocks_[k - 1];
    std::vector<Tensor> conv;
    conv.reserve(sentences.size());
    for (const Hierarchy& h : out) {
      conv.push_back(nn::Conv1d(h.levels.back(), block.weight, block.bias));
    }
    std::vector<Tensor> normed;
    if (conv.size() == 1) {
      normed.push_back(nn::BatchNorm1d(conv[0], block.gamma, block.beta,
                                       block.stats, ctx.mode));
    } else {
      Tensor joined = nn::Concat<double>(conv, 1);
      joined = nn::BatchNorm1d(joined, block.gamma, block.beta, block.stats,
                               ctx.mode);
      std::size_t offset = 0;
      for (const Tensor& c : conv) {
        normed.push_back(nn::Slice(joined, 1, offset, offset + c.dim(1)));
        offset += c.dim(1);
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].levels.push_back(nn::MaxPool1d(nn::Relu(normed[i])));
    }
  }
  return out;
}

Hierarchy MatchingModel::Encode(const TokenIds& sentence,
                                const ForwardContext& ctx, int max_level) {
  const TokenIds* one[] = {&sentence};
  return std::move(EncodeBatch(one, ctx, max_level)[0]);
}

Tensor MatchingModel::MatchPair(const Tensor& xq, const Tensor& xa, int u,
                                int v, const ForwardContext& ctx) const {
  std::size_t index = pairs_.size();
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (pairs_[i] == ScalePair{u, v}) index = i;
  }
  if (index == pairs_.size()) {
    throw ContractError("scale pair (" + std::to_string(u) + "," +
                        std::to_string(v) + ") not used by this score mode");
  }
  const Mlp& net = compare_[index];
  const std::size_t wu = config_.Width(u), wv = config_.Width(v);
  if (xq.rank() != 2 || xa.rank() != 2 || xq.dim(0) != wu || xa.dim(0) != wv) {
    throw DimensionError("match_pair(" + std::to_string(u) + "," +
                         std::to_string(v) + "): widths " +
                         nn::ShapeString(xq.shape()) + " / " +
                         nn::ShapeString(xa.shape()) + " do not match " +
                         std::to_string(wu) + " / " + std::to_string(wv));
  }
  const std::size_t m = xq.dim(1), n = xa.dim(1);
  // First layer of H on [q_i, a_j] splits into a question part and an
  // answer part, so it is applied once per position instead of per pair.
  Tensor proj_q = nn::AddRowBias(
      nn::MatMul(nn::Transpose(xq), nn::Slice(net.w1, 0, 0, wu)), net.b1);
  Tensor proj_a =
      nn::MatMul(nn::Transpose(xa), nn::Slice(net.w1, 0, wu, wu + wv));
  Tensor hidden = nn::Relu(nn::PairwiseAdd(proj_q, proj_a));
  if (ctx.mode == nn::Mode::kTrain && config_.dropout > 0.0) {
    if (!ctx.rng) throw ContractError("train-mode dropout needs an rng");
    hidden = nn::Dropout(hidden, config_.dropout, ctx.mode, *ctx.rng);
  }
  Tensor grid = nn::AddRowBias(
      nn::MatMul(nn::Reshape(hidden, {m * n, config_.compare_hidden}), net.w2),
      net.b2);
  grid = nn::Reshape(grid, {m, n, config_.match_dim});
  Tensor per_question = nn::ReduceMean(nn::ReduceMax(grid, 1), 0);
  Tensor per_answer = nn::ReduceMean(nn::ReduceMax(grid, 0), 0);
  const Tensor parts[] = {per_question, per_answer};
  return nn::Concat<double>(parts, 0);
}

std::vector<Tensor> MatchingModel::MatchVectors(
    const Hierarchy& q, const Hierarchy& a, const ForwardContext& ctx) const {
  std::vector<Tensor> out;
  out.reserve(pairs_.size());
  for (const ScalePair& p : pairs_) {
    if (static_cast<std::size_t>(p.first) >= q.levels.size() ||
        static_cast<std::size_t>(p.second) >= a.levels.size()) {
      throw ContractError("hierarchy too shallow for scale pair (" +
                          std::to_string(p.first) + "," +
                          std::to_string(p.second) + ")");
    }
    out.push_back(MatchPair(q.levels[p.first], a.levels[p.second], p.first,
                            p.second, ctx));
  }
  return out;
}

Tensor MatchingModel::Aggregate(std::span<const Tensor> match_vectors,
                                const ForwardContext& ctx) const {
  Tensor joined = nn::Concat<double>(match_vectors, 0);
  joined = nn::Reshape(joined, {1, joined.size()});
  Tensor hidden = nn::Relu(
      nn::AddRowBias(nn::MatMul(joined, aggregate_.w1), aggregate_.b1));
  if (ctx.mode == nn::Mode::kTrain && config_.dropout > 0.0) {
    if (!ctx.rng) throw ContractError("train-mode dropout needs an rng");
    hidden = nn::Dropout(hidden, config_.dropout, ctx.mode, *ctx.rng);
  }
  Tensor out = nn::AddRowBias(nn::MatMul(hidden, aggregate_.w2), aggregate_.b2);
  return nn::Reshape(out, {});
}

Tensor MatchingModel::ScoreEncoded(const Hierarchy& q, const Hierarchy& a,
                                   const ForwardContext& ctx) const {
  std::vector<Tensor> vectors = MatchVectors(q, a, ctx);
  return Aggregate(vectors, ctx);
}

Tensor MatchingModel::Score(const TokenIds& q, const TokenIds& a,
                            const ForwardContext& ctx) {
  const std::pair<const TokenIds*, const TokenIds*> one[] = {{&q, &a}};
  return ScoreBatch(one, ctx)[0];
}

std::vector<Tensor> MatchingModel::ScoreBatch(
    std::span<const std::pair<const TokenIds*, const TokenIds*>> pairs,
    const ForwardContext& ctx) {
  std::vector<const TokenIds*> unique;
  std::map<const TokenIds*, std::size_t> slot;
  auto intern = [&](const TokenIds* s) {
    auto [it, inserted] = slot.try_emplace(s, unique.size());
    if (inserted) unique.push_back(s);
    return it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (const auto& [q, a] : pairs) index.emplace_back(intern(q), intern(a));
  std::vector<Hierarchy> encoded = EncodeBatch(unique, ctx, LevelsUsed());
  std::vector<Tensor> scores;
  scores.reserve(pairs.size());
  for (const auto& [qi, ai] : index) {
    scores.push_back(ScoreEncoded(encoded[qi], encoded[ai], ctx));
  }
  return scores;
}

double MatchingModel::ScoreValue(const TokenIds& q, const TokenIds& a) {
  nn::NoGradScope<double> no_grad;
  return Score(q, a, ForwardContext{}).item();
}

std::vector<double> MatchingModel::ScoreCandidates(
    const TokenIds& q, std::span<const TokenIds* const> answers) {
  nn::NoGradScope<double> no_grad;
  const ForwardContext ctx;
  const Hierarchy question = Encode(q, ctx, LevelsUsed());
  std::vector<double> out;
  out.reserve(answers.size());
  for (const TokenIds* a : answers) {
    out.push_back(
        ScoreEncoded(question, Encode(*a, ctx, LevelsUsed()), ctx).item());
  }
  return out;
}

double MatchingModel::DiscriminatorProb(const TokenIds& q, const TokenIds& a) {
  nn::NoGradScope<double> no_grad;
  return nn::Sigmoid(Score(q, a, ForwardContext{})).item();
}

std::vector<NamedTensor> MatchingModel::Parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", embedding_});
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string prefix = "block" + std::to_string(k + 1);
    out.push_back({prefix + ".conv.weight", blocks_[k].weight});
    out.push_back({prefix + ".conv.bias", blocks_[k].bias});
    out.push_back({prefix + ".bn.gamma", blocks_[k].gamma});
    out.push_back({prefix + ".bn.beta", blocks_[k].beta});
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const std::string prefix = PairName(pairs_[i]);
    out.push_back({prefix + ".w1", compare_[i].w1});
    out.push_back({prefix + ".b1", compare_[i].b1});
    out.push_back({prefix + ".w2", compare_[i].w2});
    out.push_back({prefix + ".b2", compare_[i].b2});
  }
  out.push_back({"aggregate.w1", aggregate_.w1});
  out.push_back({"aggregate.b1", aggregate_.b1});
  out.push_back({"aggregate.w2", aggregate_.w2});
  out.push_back({"aggregate.b2", aggregate_.b2});
  return out;
}

std::vector<Tensor> MatchingModel::TrainableParameters() const {
  std::vector<Tensor> out;
  for (const NamedTensor& p : Parameters()) {
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::vector<Tensor> MatchingModel::RegularizedParameters() const {
  std::vector<Tensor> out;
  for (const ConvBlock& b : blocks_) out.push_back(b.weight);
  for (const Mlp& m : compare_) {
    out.push_back(m.w1);
    out.push_back(m.w2);
  }
  out.push_back(aggregate_.w1);
  out.push_back(aggregate_.w2);
  return out;
}

std::vector<NamedTensor> MatchingModel::Buffers() const {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string prefix = "block" + std::to_string(k + 1);
    const auto& stats = blocks_[k].stats;
    out.push_back({prefix + ".bn.running_mean",
                   Tensor({stats.running_mean.size()}, stats.running_mean)});
    out.push_back({prefix + ".bn.running_var",
                   Tensor({stats.running_var.size()}, stats.running_var)});
  }
  return out;
}

void MatchingModel::Assign(const std::string& name,
                           std::span<const double> values,
                           const nn::Shape& shape) {
  auto copy_into = [&](std::span<double> dst, const nn::Shape& dst_shape) {
    if (dst_shape != shape || values.size() != dst.size()) {
      throw DimensionError("tensor " + name + ": stored shape " +
                           nn::ShapeString(shape) + " vs model shape " +
                           nn::ShapeString(dst_shape));
    }
    std::copy(values.begin(), values.end(), dst.begin());
  };
  for (NamedTensor& p : Parameters()) {
    if (p.name == name) {
      copy_into(p.tensor.mutable_data(), p.tensor.shape());
      return;
    }
  }
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string prefix = "block" + std::to_string(k + 1);
    auto& stats = blocks_[k].stats;
    if (name == prefix + ".bn.running_mean") {
      copy_into(stats.running_mean, {stats.running_mean.size()});
      return;
    }
    if (name == prefix + ".bn.running_var") {
      copy_into(stats.running_var, {stats.running_var.size()});
      return;
    }
  }
  throw ContractError("unknown tensor name " + name);
}

std::size_t MatchingModel::NumParameters() const {
  std::size_t n = 0;
  for (const NamedTensor& p : Parameters()) n += p.tensor.size();
  return n;
}

}  // namespace msm
