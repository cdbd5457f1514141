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

#include "msmatch/adversarial.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "msmatch/error.h"
#include "msmatch/eval.h"

namespace msm {

namespace {

using nn::Tensor;

nn::Rng Stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return nn::Rng(seq);
}

Tensor L2Penalty(const MatchingModel& model, double l2) {
  Tensor total = Tensor::Scalar(0.0);
  if (l2 == 0.0) return total;
  for (const Tensor& w : model.RegularizedParameters()) {
    total = nn::Add(total, nn::SumSquares(w));
  }
  return nn::Scale(total, l2);
}

void CheckGradients(const nn::Adam& optimizer, const char* what) {
  for (const Tensor& p : optimizer.params()) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError(std::string("non-finite gradient in ") + what);
      }
    }
  }
}

bool AllFinite(const MatchingModel& model) {
  for (const NamedTensor& p : model.Parameters()) {
    for (double v : p.tensor.data()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

const TokenIds& Tokens(const Corpus& corpus, const AnswerRef& ref) {
  return corpus.threads[ref.thread].candidates[ref.candidate].tokens;
}

}  // namespace

CandidatePool BuildPool(const Corpus& corpus, std::size_t thread,
                        std::size_t pool_size,
                        std::span<const std::size_t> other_threads,
                        nn::Rng& rng) {
  const QuestionThread& own = corpus.threads.at(thread);
  std::vector<AnswerRef> eligible;
  std::vector<PoolSource> sources;
  for (std::size_t c = 0; c < own.candidates.size(); ++c) {
    if (!own.candidates[c].relevant) {
      eligible.push_back({thread, c});
      sources.push_back(PoolSource::kLabeledNegative);
    }
  }
  for (std::size_t t : other_threads) {
    if (t == thread) continue;
    for (std::size_t c = 0; c < corpus.threads.at(t).candidates.size(); ++c) {
      eligible.push_back({t, c});
      sources.push_back(PoolSource::kOtherThread);
    }
  }
  if (eligible.empty()) {
    throw CorpusError("no eligible negatives for thread " + own.thread_id);
  }
  const std::size_t n = std::min(pool_size, eligible.size());
  // Partial Fisher-Yates over an index permutation.
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  CandidatePool pool;
  pool.thread = thread;
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
    pool.answers.push_back(eligible[order[i]]);
    pool.sources.push_back(sources[order[i]]);
  }
  return pool;
}

bool PoolExcludesPositives(const Corpus& corpus, const CandidatePool& pool) {
  const QuestionThread& own = corpus.threads.at(pool.thread);
  for (const AnswerRef& ref : pool.answers) {
    const Candidate& c =
        corpus.threads.at(ref.thread).candidates.at(ref.candidate);
    if (ref.thread == pool.thread && c.relevant) return false;
    for (const Candidate& positive : own.candidates) {
      if (positive.relevant && positive.answer_id == c.answer_id) return false;
    }
  }
  return true;
}

std::vector<double> GeneratorDistribution(std::span<const double> scores) {
  if (scores.empty()) {
    throw ContractError("generator distribution over an empty pool");
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> GeneratorDistribution(const Corpus& corpus,
                                          const CandidatePool& pool,
                                          MatchingModel& generator) {
  if (pool.answers.empty()) {
    throw ContractError("generator distribution over an empty pool");
  }
  std::vector<const TokenIds*> answers;
  for (const AnswerRef& ref : pool.answers)
    answers.push_back(&Tokens(corpus, ref));
  const std::vector<double> scores =
      generator.ScoreCandidates(corpus.threads[pool.thread].question, answers);
  return GeneratorDistribution(scores);
}

std::vector<std::size_t> SampleNegatives(std::span<const double> probs,
                                         std::size_t count, nn::Rng& rng,
                                         SamplingMode mode) {
  if (count > probs.size()) {
    throw ContractError("cannot sample " + std::to_string(count) +
                        " distinct answers from a pool of " +
                        std::to_string(probs.size()));
  }
  std::vector<double> weight(probs.begin(), probs.end());
  for (double& w : weight) w = std::isfinite(w) ? std::max(w, 0.0) : 0.0;
  std::vector<std::size_t> out;
  out.reserve(count);
  if (mode == SamplingMode::kTopK) {
    std::vector<std::size_t> order(weight.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(
        order.begin(), order.end(),
        [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
    out.assign(order.begin(), order.begin() + count);
    return out;
  }
  std::vector<bool> taken(weight.size(), false);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t s = 0; s < count; ++s) {
    double remaining = 0.0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (!taken[i]) remaining += weight[i];
    }
    std::size_t chosen = weight.size();
    if (remaining > 0.0) {
      const double target = uniform(rng) * remaining;
      double acc = 0.0;
      for (std::size_t i = 0; i < weight.size(); ++i) {
        if (taken[i] || weight[i] == 0.0) continue;
        acc += weight[i];
        chosen = i;
        if (target < acc) break;
      }
    } else {
      const std::size_t left = weight.size() - s;
      std::size_t k =
          std::uniform_int_distribution<std::size_t>(0, left - 1)(rng);
      for (std::size_t i = 0; i < weight.size(); ++i) {
        if (taken[i]) continue;
        if (k-- == 0) {
          chosen = i;
          break;
        }
      }
    }
    taken[chosen] = true;
    out.push_back(chosen);
  }
  return out;
}

double Reward(double discriminator_prob) {
  return std::log(std::max(1.0 - discriminator_prob, kLogFloor));
}

Tensor DiscriminatorLoss(MatchingModel& model, const DiscriminatorBatch& batch,
                         const ForwardContext& ctx, double l2) {
  if (batch.examples.empty() || batch.num_questions == 0) {
    throw ContractError("discriminator batch is empty");
  }
  std::vector<std::pair<const TokenIds*, const TokenIds*>> pairs;
  std::vector<double> signs;
  for (const DiscriminatorExample& e : batch.examples) {
    pairs.emplace_back(e.question, e.answer);
    signs.push_back(e.positive ? 1.0 : -1.0);
  }
  std::vector<Tensor> scores = model.ScoreBatch(pairs, ctx);
  for (Tensor& s : scores) s = nn::Reshape(s, {1});
  // log D = log sigmoid(f); log(1 - D) = log sigmoid(-f).
  Tensor signed_scores =
      nn::Mul(nn::Concat<double>(scores, 0), Tensor({signs.size()}, signs));
  Tensor log_likelihood =
      nn::Sum(nn::ClampedLog(nn::Sigmoid(signed_scores), kLogFloor));
  Tensor loss = nn::Scale(log_likelihood,
                          -1.0 / static_cast<double>(batch.num_questions));
  return nn::Add(loss, L2Penalty(model, l2));
}

double DiscriminatorStep(MatchingModel& model, nn::Adam& optimizer,
                         const DiscriminatorBatch& batch, double l2,
                         nn::Rng& rng) {
  optimizer.ZeroGrad();
  nn::Tape tape;
  Tensor loss;
  {
    nn::TapeScope<double> scope(tape);
    loss = DiscriminatorLoss(model, batch, {nn::Mode::kTrain, &rng}, l2);
  }
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw DivergenceError("discriminator loss is not finite over " +
                          std::to_string(batch.examples.size()) + " examples");
  }
  tape.Backward(loss);
  CheckGradients(optimizer, "discriminator");
  optimizer.Step();
  return value;
}

Tensor GeneratorSurrogate(MatchingModel& generator,
                          std::span<const GeneratorExample> examples,
                          double baseline, const ForwardContext& ctx,
                          double l2) {
  if (examples.empty()) throw ContractError("generator batch is empty");
  std::vector<std::pair<const TokenIds*, const TokenIds*>> pairs;
  for (const GeneratorExample& e : examples) {
    if (e.pool.empty() || e.sampled.empty() ||
        e.sampled.size() != e.rewards.size()) {
      throw ContractError(
          "generator example needs a pool and rewarded samples");
    }
    for (const TokenIds* a : e.pool) pairs.emplace_back(e.question, a);
  }
  std::vector<Tensor> scores = generator.ScoreBatch(pairs, ctx);
  Tensor total = Tensor::Scalar(0.0);
  std::size_t offset = 0;
  for (const GeneratorExample& e : examples) {
    std::vector<Tensor> pool_scores;
    for (std::size_t i = 0; i < e.pool.size(); ++i) {
      pool_scores.push_back(nn::Reshape(scores[offset + i], {1}));
    }
    offset += e.pool.size();
    Tensor log_probs = nn::LogSoftmax(nn::Concat<double>(pool_scores, 0), 0);
    std::vector<double> coef(e.pool.size(), 0.0);
    for (std::size_t s = 0; s < e.sampled.size(); ++s) {
      if (!std::isfinite(e.rewards[s])) {
        throw DivergenceError("non-finite reward for a sampled answer");
      }
      coef.at(e.sampled[s]) +=
          (e.rewards[s] - baseline) / static_cast<double>(e.sampled.size());
    }
    total = nn::Add(total,
                    nn::Sum(nn::Mul(log_probs, Tensor({coef.size()}, coef))));
  }
  total = nn::Scale(total, 1.0 / static_cast<double>(examples.size()));
  return nn::Add(total, L2Penalty(generator, l2));
}

double GeneratorStep(MatchingModel& generator, nn::Adam& optimizer,
                     std::span<const GeneratorExample> examples,
                     double baseline, double l2, nn::Rng& rng) {
  optimizer.ZeroGrad();
  nn::Tape tape;
  Tensor loss;
  {
    nn::TapeScope<double> scope(tape);
    loss = GeneratorSurrogate(generator, examples, baseline,
                              {nn::Mode::kTrain, &rng}, l2);
  }
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw DivergenceError("generator surrogate loss is not finite");
  }
  tape.Backward(loss);
  CheckGradients(optimizer, "generator");
  optimizer.Step();
  return value;
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (pool_size < 1) throw ConfigError("pool_size must be positive");
  if (neg_samples < 1 || neg_samples > pool_size) {
    throw ConfigError("neg_samples must lie in [1, pool_size]");
  }
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || lr_decay_every < 1) {
    throw ConfigError("invalid learning-rate schedule");
  }
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (discriminator_epochs < 1 || generator_epochs < 0) {
    throw ConfigError("invalid alternation schedule");
  }
}

std::string EpochLog::ToJson() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["phase"] = phase;
  j["mean_loss"] = mean_loss;
  j["mean_reward"] =
      mean_reward ? nlohmann::ordered_json(*mean_reward) : nullptr;
  j["baseline"] = baseline;
  j["dev_map"] = dev_map ? nlohmann::ordered_json(*dev_map) : nullptr;
  j["dev_mrr"] = dev_mrr ? nlohmann::ordered_json(*dev_mrr) : nullptr;
  j["lr"] = learning_rate;
  return j.dump();
}

std::optional<Split> HeldOutSplit(const Corpus& corpus) {
  for (Split s : {Split::kDev, Split::kTest}) {
    for (const QuestionThread& t : corpus.threads) {
      if (t.split == s && t.NumRelevant() > 0) return s;
    }
  }
  return std::nullopt;
}

TrainResult Train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& config,
                  const std::optional<Tensor>& embeddings,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.Validate();
  ModelConfig d_config = model_config;
  d_config.vocab_size = corpus.vocab.size();
  ModelConfig g_config = d_config;
  g_config.seed = d_config.seed + 1;
  MatchingModel discriminator(d_config);
  MatchingModel generator(g_config);
  if (embeddings) {
    discriminator.SetEmbeddings(embeddings->Clone(), false);
    generator.SetEmbeddings(embeddings->Clone(), false);
  }

  std::vector<std::size_t> train_threads;
  std::vector<std::size_t> questions;
  for (std::size_t i : corpus.ThreadsIn(Split::kTrain)) {
    train_threads.push_back(i);
    if (corpus.threads[i].NumRelevant() > 0) questions.push_back(i);
  }
  if (questions.empty()) {
    throw CorpusError("training split has no thread with a relevant answer");
  }
  const std::optional<Split> held_out_split =
      config.evaluate ? HeldOutSplit(corpus) : std::nullopt;
  const bool held_out = held_out_split.has_value();
  const Split held_out_value = held_out_split.value_or(Split::kTest);

  nn::Adam d_opt(discriminator.TrainableParameters(), config.learning_rate);
  nn::Adam g_opt(generator.TrainableParameters(), config.learning_rate);
  nn::Rng pool_rng = Stream(config.seed, 1);
  nn::Rng shuffle_rng = Stream(config.seed, 2);
  nn::Rng sample_rng = Stream(config.seed, 3);
  nn::Rng d_dropout = Stream(config.seed, 4);
  nn::Rng g_dropout = Stream(config.seed, 5);

  RewardBaseline baseline;
  std::vector<EpochLog> log;
  auto emit = [&](EpochLog entry) {
    if (on_epoch) on_epoch(entry);
    log.push_back(std::move(entry));
  };
  auto pool_tokens = [&](const CandidatePool& pool) {
    std::vector<const TokenIds*> out;
    for (const AnswerRef& ref : pool.answers)
      out.push_back(&Tokens(corpus, ref));
    return out;
  };
  auto batches = [&](std::vector<std::size_t> order) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      out.emplace_back(
          order.begin() + i,
          order.begin() + std::min(order.size(), i + config.batch_size));
    }
    return out;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::ScheduledLearningRate(
        epoch, config.learning_rate, config.lr_decay, config.lr_decay_every);
    d_opt.set_learning_rate(lr);
    g_opt.set_learning_rate(lr);

    std::vector<CandidatePool> pools(corpus.threads.size());
    for (std::size_t q : questions) {
      pools[q] =
          BuildPool(corpus, q, config.pool_size, train_threads, pool_rng);
      if (config.debug_checks && !PoolExcludesPositives(corpus, pools[q])) {
        throw IntegrityError("pool for " + corpus.threads[q].thread_id +
                             " contains a labeled positive");
      }
    }
    auto sample_count = [&](const CandidatePool& pool) {
      return std::min<std::size_t>(config.neg_samples, pool.size());
    };

    // Discriminator phase.
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (int rep = 0; rep < config.discriminator_epochs; ++rep) {
      std::vector<std::vector<double>> distributions(corpus.threads.size());
      for (std::size_t q : questions) {
        if (config.adversarial) {
          distributions[q] = GeneratorDistribution(corpus, pools[q], generator);
        } else {
          distributions[q].assign(pools[q].size(), 1.0 / pools[q].size());
        }
      }
      std::size_t batch_index = 0;
      for (const auto& batch_questions : batches(questions)) {
        DiscriminatorBatch batch;
        batch.num_questions = batch_questions.size();
        for (std::size_t q : batch_questions) {
          const QuestionThread& thread = corpus.threads[q];
          for (const Candidate& c : thread.candidates) {
            if (c.relevant)
              batch.examples.push_back({&thread.question, &c.tokens, true});
          }
          const auto picks =
              SampleNegatives(distributions[q], sample_count(pools[q]),
                              sample_rng, config.sampling);
          for (std::size_t i : picks) {
            batch.examples.push_back({&thread.question,
                                      &Tokens(corpus, pools[q].answers[i]),
                                      false});
          }
        }
        loss_sum += DiscriminatorStep(discriminator, d_opt, batch, config.l2,
                                      d_dropout);
        ++loss_count;
        if (!AllFinite(discriminator)) {
          throw DivergenceError("discriminator parameters diverged at epoch " +
                                std::to_string(epoch) + ", batch " +
                                std::to_string(batch_index));
        }
        ++batch_index;
      }
    }
    EpochLog d_entry;
    d_entry.epoch = epoch;
    d_entry.phase = "discriminator";
    d_entry.mean_loss = loss_sum / static_cast<double>(loss_count);
    d_entry.baseline = baseline.value;
    d_entry.learning_rate = lr;
    if (held_out) {
      const Metrics m = EvaluateSplit(corpus, held_out_value, discriminator);
      d_entry.dev_map = m.map;
      d_entry.dev_mrr = m.mrr;
    }
    emit(std::move(d_entry));

    if (!config.adversarial || config.generator_epochs == 0) continue;

    // Generator phase.
    double g_loss_sum = 0.0;
    std::size_t g_loss_count = 0;
    double reward_sum = 0.0;
    std::size_t reward_count = 0;
    for (int rep = 0; rep < config.generator_epochs; ++rep) {
      std::size_t batch_index = 0;
      for (const auto& batch_questions : batches(questions)) {
        std::vector<GeneratorExample> examples;
        for (std::size_t q : batch_questions) {
          const QuestionThread& thread = corpus.threads[q];
          GeneratorExample e;
          e.question = &thread.question;
          e.pool = pool_tokens(pools[q]);
          const auto probs = GeneratorDistribution(corpus, pools[q], generator);
          e.sampled = SampleNegatives(probs, sample_count(pools[q]), sample_rng,
                                      config.sampling);
          for (std::size_t i : e.sampled) {
            const double r = Reward(
                discriminator.DiscriminatorProb(thread.question, *e.pool[i]));
            e.rewards.push_back(r);
            reward_sum += r;
            ++reward_count;
          }
          examples.push_back(std::move(e));
        }
        g_loss_sum += GeneratorStep(generator, g_opt, examples, baseline.value,
                                    config.l2, g_dropout);
        ++g_loss_count;
        if (!AllFinite(generator)) {
          throw DivergenceError("generator parameters diverged at epoch " +
                                std::to_string(epoch) + ", batch " +
                                std::to_string(batch_index));
        }
        ++batch_index;
      }
    }
    EpochLog g_entry;
    g_entry.epoch = epoch;
    g_entry.phase = "generator";
    g_entry.mean_loss = g_loss_sum / static_cast<double>(g_loss_count);
    g_entry.mean_reward = reward_sum / static_cast<double>(reward_count);
    g_entry.baseline = baseline.value;
    g_entry.learning_rate = lr;
    if (held_out) {
      const Metrics m = EvaluateSplit(corpus, held_out_value, generator);
      g_entry.dev_map = m.map;
      g_entry.dev_mrr = m.mrr;
    }
    baseline.value = *g_entry.mean_reward;
    baseline.count = reward_count;
    emit(std::move(g_entry));
  }
  return TrainResult{std::move(discriminator), std::move(generator),
                     std::move(log)};
}

}  // namespace msm
