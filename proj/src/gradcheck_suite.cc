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

#include "msmatch/gradcheck_suite.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "msmatch/adversarial.h"
#include "msmatch/gradcheck.h"
#include "msmatch/model.h"
#include "msmatch/ops.h"

namespace msm {

namespace {

using nn::Tensor;

class Fixture {
 public:
  explicit Fixture(std::uint64_t seed) : rng_(seed) {}

  Tensor Random(nn::Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(nn::NumElements(shape));
    for (double& x : v) x = u(rng_);
    return Tensor(std::move(shape), std::move(v), true);
  }

  // Values bounded away from zero so relu stays differentiable.
  Tensor AwayFromZero(nn::Shape shape) {
    Tensor t = Random(std::move(shape), 0.1, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (double& x : t.mutable_data()) {
      if (flip(rng_)) x = -x;
    }
    return t;
  }

  nn::Rng& rng() { return rng_; }

 private:
  nn::Rng rng_;
};

using Check = std::function<double(Fixture&)>;

// Fixed random projection weights turn each output into a scalar with a
// dense gradient.
double Unary(Fixture& fx, const Tensor& x,
             const std::function<Tensor(const Tensor&)>& op) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Tensor out = op(x.Detach());
  std::vector<double> weights(out.size());
  for (double& v : weights) v = u(fx.rng());
  const Tensor proj(out.shape(), std::move(weights));
  const Tensor inputs[] = {x};
  return nn::GradCheck([&] { return nn::Sum(nn::Mul(op(x), proj)); }, inputs);
}

double Binary(Fixture& fx, const Tensor& a, const Tensor& b,
              const std::function<Tensor(const Tensor&, const Tensor&)>& op) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Tensor out = op(a.Detach(), b.Detach());
  std::vector<double> weights(out.size());
  for (double& v : weights) v = u(fx.rng());
  const Tensor proj(out.shape(), std::move(weights));
  const Tensor inputs[] = {a, b};
  return nn::GradCheck([&] { return nn::Sum(nn::Mul(op(a, b), proj)); },
                       inputs);
}

std::vector<std::pair<std::string, Check>> PrimitiveChecks() {
  std::vector<std::pair<std::string, Check>> checks;
  checks.emplace_back("matmul", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({3, 4}), fx.Random({4, 2}),
        [](const Tensor& a, const Tensor& b) { return nn::MatMul(a, b); });
  });
  checks.emplace_back("transpose", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 4}),
                 [](const Tensor& x) { return nn::Transpose(x); });
  });
  checks.emplace_back("add", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({2, 3}), fx.Random({2, 3}),
        [](const Tensor& a, const Tensor& b) { return nn::Add(a, b); });
  });
  checks.emplace_back("sub", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({2, 3}), fx.Random({2, 3}),
        [](const Tensor& a, const Tensor& b) { return nn::Sub(a, b); });
  });
  checks.emplace_back("mul", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({2, 3}), fx.Random({2, 3}),
        [](const Tensor& a, const Tensor& b) { return nn::Mul(a, b); });
  });
  checks.emplace_back("scale", [](Fixture& fx) {
    return Unary(fx, fx.Random({5}),
                 [](const Tensor& x) { return nn::Scale(x, -2.5); });
  });
  checks.emplace_back("add_row_bias", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({3, 4}), fx.Random({4}),
        [](const Tensor& a, const Tensor& b) { return nn::AddRowBias(a, b); });
  });
  checks.emplace_back("relu", [](Fixture& fx) {
    return Unary(fx, fx.AwayFromZero({3, 4}),
                 [](const Tensor& x) { return nn::Relu(x); });
  });
  checks.emplace_back("sigmoid", [](Fixture& fx) {
    return Unary(fx, fx.Random({6}, -4.0, 4.0),
                 [](const Tensor& x) { return nn::Sigmoid(x); });
  });
  checks.emplace_back("clamped_log", [](Fixture& fx) {
    return Unary(fx, fx.Random({6}, 0.2, 2.0),
                 [](const Tensor& x) { return nn::ClampedLog(x, 1e-12); });
  });
  checks.emplace_back("softmax", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 4}),
                 [](const Tensor& x) { return nn::Softmax(x, 1); });
  });
  checks.emplace_back("log_softmax", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 4}),
                 [](const Tensor& x) { return nn::LogSoftmax(x, 0); });
  });
  checks.emplace_back("sum", [](Fixture& fx) {
    const Tensor x = fx.Random({3, 2});
    const Tensor inputs[] = {x};
    return nn::GradCheck([&] { return nn::Sum(nn::Mul(x, x)); }, inputs);
  });
  checks.emplace_back("sum_squares", [](Fixture& fx) {
    const Tensor x = fx.Random({3, 2});
    const Tensor inputs[] = {x};
    return nn::GradCheck([&] { return nn::SumSquares(x); }, inputs);
  });
  checks.emplace_back("reduce_mean", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 4}),
                 [](const Tensor& x) { return nn::ReduceMean(x, 1); });
  });
  checks.emplace_back("reduce_max", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 4, 2}),
                 [](const Tensor& x) { return nn::ReduceMax(x, 1); });
  });
  checks.emplace_back("concat", [](Fixture& fx) {
    return Binary(fx, fx.Random({2, 3}), fx.Random({2, 2}),
                  [](const Tensor& a, const Tensor& b) {
                    const Tensor parts[] = {a, b};
                    return nn::Concat<double>(parts, 1);
                  });
  });
  checks.emplace_back("slice", [](Fixture& fx) {
    return Unary(fx, fx.Random({3, 5}),
                 [](const Tensor& x) { return nn::Slice(x, 1, 1, 4); });
  });
  checks.emplace_back("reshape", [](Fixture& fx) {
    return Unary(fx, fx.Random({2, 6}),
                 [](const Tensor& x) { return nn::Reshape(x, {3, 4}); });
  });
  checks.emplace_back("gather_rows", [](Fixture& fx) {
    const std::vector<std::int32_t> ids = {2, 0, 2, 3};
    return Unary(fx, fx.Random({4, 3}), [ids](const Tensor& x) {
      return nn::GatherRows<double>(x, ids);
    });
  });
  checks.emplace_back("pairwise_add", [](Fixture& fx) {
    return Binary(
        fx, fx.Random({3, 2}), fx.Random({4, 2}),
        [](const Tensor& a, const Tensor& b) { return nn::PairwiseAdd(a, b); });
  });
  checks.emplace_back("conv1d", [](Fixture& fx) {
    const Tensor x = fx.Random({2, 5});
    const Tensor w = fx.Random({3, 2, 3});
    const Tensor b = fx.Random({3});
    const Tensor proj = fx.Random({3, 5}).Detach();
    const Tensor inputs[] = {x, w, b};
    return nn::GradCheck(
        [&] { return nn::Sum(nn::Mul(nn::Conv1d(x, w, b), proj)); }, inputs);
  });
  checks.emplace_back("batchnorm1d", [](Fixture& fx) {
    const Tensor x = fx.Random({3, 6});
    const Tensor gamma = fx.Random({3}, 0.5, 1.5);
    const Tensor beta = fx.Random({3});
    const Tensor proj = fx.Random({3, 6}).Detach();
    const Tensor inputs[] = {x, gamma, beta};
    return nn::GradCheck(
        [&] {
          nn::BatchNormState<double> state(3);
          return nn::Sum(nn::Mul(
              nn::BatchNorm1d(x, gamma, beta, state, nn::Mode::kTrain), proj));
        },
        inputs);
  });
  checks.emplace_back("maxpool1d", [](Fixture& fx) {
    return Unary(fx, fx.AwayFromZero({2, 7}),
                 [](const Tensor& x) { return nn::MaxPool1d(x); });
  });
  checks.emplace_back("dropout", [](Fixture& fx) {
    return Unary(fx, fx.Random({4, 4}), [](const Tensor& x) {
      nn::Rng rng(7);
      return nn::Dropout(x, 0.3, nn::Mode::kTrain, rng);
    });
  });
  return checks;
}

ModelConfig SmallModel(std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = 12;
  c.embed_dim = 8;
  c.levels = 1;
  c.channels = 8;
  c.compare_hidden = 8;
  c.match_dim = 8;
  c.aggregate_hidden = 8;
  c.mode = ScoreMode::kFull;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

TokenIds RandomSentence(std::size_t length, nn::Rng& rng) {
  std::uniform_int_distribution<std::int32_t> id(1, 11);
  TokenIds s(length);
  for (auto& t : s) t = id(rng);
  return s;
}

// Unit-scale embeddings keep relu inputs and max gaps well above the
// finite-difference step; the default +-0.1 table does not.
void UnitScaleEmbeddings(MatchingModel& model, std::uint64_t seed) {
  nn::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const ModelConfig& c = model.config();
  std::vector<double> table(c.vocab_size * c.embed_dim);
  for (double& v : table) v = unit(rng);
  model.SetEmbeddings(Tensor({c.vocab_size, c.embed_dim}, std::move(table)),
                      true);
}

double ScoreCheck(std::uint64_t seed) {
  MatchingModel model(SmallModel(seed));
  UnitScaleEmbeddings(model, seed);
  nn::Rng rng(seed);
  const TokenIds q = RandomSentence(5, rng);
  const TokenIds a = RandomSentence(7, rng);
  const std::vector<Tensor> params = model.TrainableParameters();
  return nn::GradCheck(
      [&] { return model.Score(q, a, {nn::Mode::kTrain, nullptr}); }, params);
}

double DiscriminatorLossCheck(std::uint64_t seed) {
  MatchingModel model(SmallModel(seed));
  UnitScaleEmbeddings(model, seed);
  nn::Rng rng(seed + 1);
  const TokenIds q1 = RandomSentence(5, rng);
  const TokenIds q2 = RandomSentence(6, rng);
  const TokenIds a1 = RandomSentence(7, rng);
  const TokenIds a2 = RandomSentence(4, rng);
  const TokenIds a3 = RandomSentence(8, rng);
  DiscriminatorBatch batch;
  batch.num_questions = 2;
  batch.examples = {
      {&q1, &a1, true}, {&q1, &a2, false}, {&q2, &a3, true}, {&q2, &a1, false}};
  const std::vector<Tensor> params = model.TrainableParameters();
  return nn::GradCheck(
      [&] {
        return DiscriminatorLoss(model, batch, {nn::Mode::kTrain, nullptr},
                                 1e-3);
      },
      params);
}

struct GeneratorFixture {
  MatchingModel model;
  TokenIds question;
  std::vector<TokenIds> answers;
  std::vector<double> rewards;

  explicit GeneratorFixture(std::uint64_t seed)
      : model([&] {
          ModelConfig c = SmallModel(seed);
          c.mode = ScoreMode::kWordPlusNgram;
          return c;
        }()) {
    UnitScaleEmbeddings(model, seed);
    nn::Rng rng(seed + 2);
    question = RandomSentence(5, rng);
    std::uniform_real_distribution<double> r(-3.0, -0.1);
    for (std::size_t len : {4, 6, 7, 5}) {
      answers.push_back(RandomSentence(len, rng));
      rewards.push_back(r(rng));
    }
  }

  std::vector<const TokenIds*> Pool() const {
    std::vector<const TokenIds*> out;
    for (const TokenIds& a : answers) out.push_back(&a);
    return out;
  }
};

double SurrogateCheck(std::uint64_t seed) {
  GeneratorFixture fx(seed);
  GeneratorExample e;
  e.question = &fx.question;
  e.pool = fx.Pool();
  e.sampled = {2, 0};
  e.rewards = {fx.rewards[2], fx.rewards[0]};
  const GeneratorExample examples[] = {e};
  const std::vector<Tensor> params = fx.model.TrainableParameters();
  return nn::GradCheck(
      [&] {
        return GeneratorSurrogate(fx.model, examples, -0.5,
                                  {nn::Mode::kEval, nullptr}, 1e-3);
      },
      params);
}

// Enumerates the score-function estimator over every single-draw sample,
// weighted by its probability, and compares the result with central
// differences of the exact expected reward sum_i p_i r_i.
double SurrogateEnumerationCheck(std::uint64_t seed, double h = 1e-5) {
  GeneratorFixture fx(seed);
  const std::vector<const TokenIds*> pool = fx.Pool();
  const std::vector<Tensor> params = fx.model.TrainableParameters();
  auto expected_reward = [&] {
    const std::vector<double> p =
        GeneratorDistribution(fx.model.ScoreCandidates(fx.question, pool));
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += p[i] * fx.rewards[i];
    return total;
  };
  const std::vector<double> probs =
      GeneratorDistribution(fx.model.ScoreCandidates(fx.question, pool));

  std::vector<std::vector<double>> analytic;
  for (const Tensor& p : params) analytic.emplace_back(p.size(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    GeneratorExample e{&fx.question, pool, {i}, {fx.rewards[i]}};
    const GeneratorExample examples[] = {e};
    for (Tensor p : params) p.ZeroGrad();
    nn::Tape tape;
    Tensor loss;
    {
      nn::TapeScope<double> scope(tape);
      loss = GeneratorSurrogate(fx.model, examples, 0.0,
                                {nn::Mode::kEval, nullptr}, 0.0);
    }
    tape.Backward(loss);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& g = params[k].grad();
      for (std::size_t j = 0; j < g.size(); ++j) {
        analytic[k][j] += probs[i] * g[j];
      }
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto values = p.mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + h;
      const double plus = expected_reward();
      values[j] = saved - h;
      const double minus = expected_reward();
      values[j] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[k][j];
      worst =
          std::max(worst, std::abs(a - numeric) /
                              std::max({1.0, std::abs(a), std::abs(numeric)}));
    }
  }
  return worst;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.passed; });
}

std::vector<std::string> GradCheckPrimitiveNames() {
  std::vector<std::string> names;
  for (const auto& [name, check] : PrimitiveChecks()) names.push_back(name);
  return names;
}

GradCheckReport RunGradCheckSuite(std::uint64_t seed, double tolerance) {
  GradCheckReport report;
  auto add = [&](std::string name, double err) {
    report.entries.push_back(
        {std::move(name), err, std::isfinite(err) && err <= tolerance});
  };
  Fixture fx(seed);
  for (const auto& [name, check] : PrimitiveChecks()) add(name, check(fx));
  add("score_function", ScoreCheck(seed));
  add("discriminator_loss", DiscriminatorLossCheck(seed));
  add("generator_surrogate", SurrogateCheck(seed));
  add("generator_surrogate_enumerated", SurrogateEnumerationCheck(seed));
  return report;
}

}  // namespace msm
