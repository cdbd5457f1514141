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

// Independent reference implementations shared by the test binaries.

#ifndef MSMATCH_TESTS_ORACLES_H_
#define MSMATCH_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msmatch/adversarial.h"
#include "msmatch/corpus.h"
#include "msmatch/eval.h"
#include "msmatch/ops.h"
#include "msmatch/tensor.h"

namespace msm::oracle {

// A thread with random scores and labels, plus its scores.
struct MetricInstance {
  QuestionThread thread;
  std::vector<double> scores;
};

// 5-100 candidates, 0-12 relevant. Scores are drawn from a small grid so
// ties occur and exercise the answer-id tie break.
inline MetricInstance RandomMetricInstance(std::mt19937_64& rng, int index) {
  MetricInstance out;
  const int n = std::uniform_int_distribution<int>(5, 100)(rng);
  const int r = std::uniform_int_distribution<int>(0, std::min(12, n))(rng);
  out.thread.thread_id = "t" + std::to_string(index);
  std::vector<bool> labels(n, false);
  for (int i = 0; i < r; ++i) labels[i] = true;
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_int_distribution<int> grid(0, 40);
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "a%03d", i);
    out.thread.candidates.push_back({id, {1}, labels[i]});
    out.scores.push_back(grid(rng) * 0.25 - 5.0);
  }
  return out;
}

// Labels in rank order: repeated selection of the best remaining candidate
// (highest score, then smallest answer id).
inline std::vector<bool> RankedLabels(const MetricInstance& inst) {
  const auto& c = inst.thread.candidates;
  std::vector<bool> used(c.size(), false), labels;
  for (std::size_t step = 0; step < c.size(); ++step) {
    std::size_t best = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (used[i]) continue;
      if (best == c.size() || inst.scores[i] > inst.scores[best] ||
          (inst.scores[i] == inst.scores[best] &&
           c[i].answer_id < c[best].answer_id)) {
        best = i;
      }
    }
    used[best] = true;
    labels.push_back(c[best].relevant);
  }
  return labels;
}

// Average precision at 10 from the definition: the precision at every
// relevant rank k <= 10, counted afresh, summed and divided by min(R, 10).
inline std::optional<double> DirectAp(const std::vector<bool>& labels) {
  std::size_t total_relevant = 0;
  for (bool l : labels) total_relevant += l ? 1 : 0;
  if (total_relevant == 0) return std::nullopt;
  double sum = 0.0;
  for (std::size_t k = 1; k <= 10 && k <= labels.size(); ++k) {
    if (!labels[k - 1]) continue;
    std::size_t in_top_k = 0;
    for (std::size_t j = 0; j < k; ++j) in_top_k += labels[j] ? 1 : 0;
    sum += static_cast<double>(in_top_k) / static_cast<double>(k);
  }
  return sum / static_cast<double>(std::min<std::size_t>(total_relevant, 10));
}

inline std::optional<double> DirectRr(const std::vector<bool>& labels) {
  bool any = false;
  for (bool l : labels) any = any || l;
  if (!any) return std::nullopt;
  for (std::size_t k = 1; k <= 10 && k <= labels.size(); ++k) {
    if (labels[k - 1]) return 1.0 / static_cast<double>(k);
  }
  return 0.0;
}

// Mean of the defined values; nullopt when none is defined.
inline std::optional<double> MeanDefined(
    const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// A softmax generator over a pool of 3 answers with scores s = X theta,
// X fixed (3 x 10) and theta the 10 parameters.
class ToyGenerator {
 public:
  static constexpr std::size_t kParams = 10;
  static constexpr std::size_t kPool = 3;

  ToyGenerator() {
    std::vector<double> x(kPool * kParams);
    for (std::size_t i = 0; i < kPool; ++i) {
      for (std::size_t j = 0; j < kParams; ++j) {
        x[i * kParams + j] = std::sin(1.0 + 3.0 * i + 0.7 * j);
      }
    }
    features_ = nn::Tensor({kPool, kParams}, std::move(x));
    std::vector<double> t(kParams);
    for (std::size_t j = 0; j < kParams; ++j) t[j] = 0.3 * std::cos(2.0 * j);
    theta_ = nn::Tensor({kParams, 1}, std::move(t), /*requires_grad=*/true);
  }

  std::vector<double> Scores() const {
    nn::Tensor s = nn::MatMul(features_, theta_);
    return {s.data().begin(), s.data().end()};
  }

  std::vector<double> Probs() const { return GeneratorDistribution(Scores()); }

  // d log p_i / d theta through the library's autodiff.
  std::vector<double> GradLogProb(std::size_t i) {
    theta_.ZeroGrad();
    nn::Tape tape;
    nn::Tensor logp;
    {
      nn::TapeScope<double> scope(tape);
      nn::Tensor all = nn::LogSoftmax(nn::MatMul(features_, theta_), 0);
      logp = nn::Sum(nn::Slice(all, 0, i, i + 1));
    }
    tape.Backward(logp);
    return {theta_.grad().begin(), theta_.grad().end()};
  }

  // sum_i p_i r_i grad log p_i.
  std::vector<double> ExactGradient(const std::vector<double>& rewards) {
    const std::vector<double> p = Probs();
    std::vector<double> g(kParams, 0.0);
    for (std::size_t i = 0; i < kPool; ++i) {
      const std::vector<double> gi = GradLogProb(i);
      for (std::size_t j = 0; j < kParams; ++j)
        g[j] += p[i] * rewards[i] * gi[j];
    }
    return g;
  }

  struct Estimate {
    std::vector<double> mean;
    std::vector<double> standard_error;
  };

  // Averages r_i grad log p_i over `draws` samples i ~ p.
  Estimate MonteCarlo(const std::vector<double>& rewards, int draws,
                      std::uint64_t seed) {
    const std::vector<double> p = Probs();
    std::vector<std::vector<double>> per_index;
    for (std::size_t i = 0; i < kPool; ++i) per_index.push_back(GradLogProb(i));
    nn::Rng rng(seed);
    std::vector<double> sum(kParams, 0.0), sum_sq(kParams, 0.0);
    for (int t = 0; t < draws; ++t) {
      const std::size_t i = SampleNegatives(p, 1, rng)[0];
      for (std::size_t j = 0; j < kParams; ++j) {
        const double v = rewards[i] * per_index[i][j];
        sum[j] += v;
        sum_sq[j] += v * v;
      }
    }
    Estimate e;
    for (std::size_t j = 0; j < kParams; ++j) {
      const double mean = sum[j] / draws;
      const double var =
          (sum_sq[j] / draws - mean * mean) * draws / (draws - 1);
      e.mean.push_back(mean);
      e.standard_error.push_back(std::sqrt(std::max(var, 0.0) / draws));
    }
    return e;
  }

 private:
  nn::Tensor features_;
  nn::Tensor theta_;
};

}  // namespace msm::oracle

#endif  // MSMATCH_TESTS_ORACLES_H_
