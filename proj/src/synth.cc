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

#include "msmatch/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "msmatch/error.h"

namespace msm {

namespace {

// Topics at or above `config.topics` are noise topics, spelled "n".
std::string TopicPrefix(int topic, int topics) {
  return topic < topics ? "t" + std::to_string(topic)
                        : "n" + std::to_string(topic - topics);
}

class Generator {
 public:
  explicit Generator(const SynthConfig& config)
      : config_(config),
        rng_(config.seed),
        heads_(config.vocab_per_topic - config.vocab_per_topic / 2),
        tails_(config.vocab_per_topic / 2) {}

  std::string HeadWord(int topic, int i) const {
    return TopicPrefix(topic, config_.topics) + "h" + std::to_string(i);
  }

  std::string TailWord(int topic, int i) const {
    return TopicPrefix(topic, config_.topics) + "t" + std::to_string(i);
  }

  int Uniform(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }

  std::string Join(const std::vector<std::string>& words) {
    std::string text;
    for (const std::string& w : words) {
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    return text;
  }

  std::string Question(int topic) {
    const int len = Uniform(config_.question_min_len, config_.question_max_len);
    std::vector<std::string> words;
    for (int i = 0; i < len; ++i) {
      const int w = Uniform(0, config_.vocab_per_topic - 1);
      words.push_back(w < heads_ ? HeadWord(topic, w)
                                 : TailWord(topic, w - heads_));
    }
    return Join(words);
  }

  // Alternating head/tail sequence, or heads-then-tails when `blocked`.
  std::string Answer(int topic, bool blocked) {
    const int len = Uniform(config_.answer_min_len, config_.answer_max_len);
    const int num_heads = (len + 1) / 2;
    std::vector<std::string> heads, tails;
    for (int i = 0; i < num_heads; ++i)
      heads.push_back(HeadWord(topic, Uniform(0, heads_ - 1)));
    for (int i = num_heads; i < len; ++i)
      tails.push_back(TailWord(topic, Uniform(0, tails_ - 1)));
    std::vector<std::string> words;
    if (blocked) {
      words = heads;
      words.insert(words.end(), tails.begin(), tails.end());
    } else {
      for (int i = 0; i < num_heads; ++i) {
        words.push_back(heads[i]);
        if (i < static_cast<int>(tails.size())) words.push_back(tails[i]);
      }
    }
    return Join(words);
  }

  int NonPartnerTopic(int partner) {
    int t = Uniform(0, config_.topics - 2);
    if (t >= partner) ++t;
    return t;
  }

  int NoiseTopic() {
    return config_.topics + Uniform(0, config_.noise_topics - 1);
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  const SynthConfig& config_;
  std::mt19937_64 rng_;
  int heads_;
  int tails_;
};

}  // namespace

bool SynthCorpus::IsHardNegative(std::size_t thread,
                                 const std::string& answer_id) const {
  const QuestionThread& t = corpus.threads.at(thread);
  for (const Candidate& c : t.candidates) {
    if (c.answer_id == answer_id && c.relevant) return false;
  }
  auto topic = answer_topic.find(answer_id);
  auto blocked = answer_blocked.find(answer_id);
  return topic != answer_topic.end() && blocked != answer_blocked.end() &&
         topic->second == PartnerTopic(thread_topic.at(thread)) &&
         blocked->second;
}

SynthCorpus SynthGenerate(const SynthConfig& config) {
  if (config.topics < 2) {
    throw ConfigError("synthetic corpus needs at least 2 topics");
  }
  if (config.vocab_per_topic < 2) {
    throw ConfigError(
        "vocab_per_topic must be at least 2 so topics can own "
        "disjoint head and tail words");
  }
  if (config.noise_topics < 1) {
    throw ConfigError("synthetic corpus needs at least 1 noise topic");
  }
  if (config.num_threads < 1 || config.answers_per_thread < 1 ||
      config.dev_threads < 0 || config.test_threads < 0 ||
      config.dev_threads + config.test_threads > config.num_threads) {
    throw ConfigError("inconsistent synthetic thread counts");
  }
  if (config.question_min_len < 1 || config.answer_min_len < 1 ||
      config.question_min_len > config.question_max_len ||
      config.answer_min_len > config.answer_max_len) {
    throw ConfigError("invalid synthetic sentence lengths");
  }
  if (config.relevant_fraction <= 0.0 || config.confusable_fraction < 0.0 ||
      config.relevant_fraction + config.confusable_fraction > 1.0) {
    throw ConfigError("invalid synthetic answer fractions");
  }

  Generator gen(config);
  SynthCorpus out;
  out.topics = config.topics;
  const int n = config.answers_per_thread;
  const int num_relevant =
      std::max(1, static_cast<int>(std::lround(config.relevant_fraction * n)));
  const int num_confusable =
      std::min(n - num_relevant,
               static_cast<int>(std::lround(config.confusable_fraction * n)));
  const int first_dev =
      config.num_threads - config.test_threads - config.dev_threads;
  const int first_test = config.num_threads - config.test_threads;

  CorpusBuilder builder;
  for (int i = 0; i < config.num_threads; ++i) {
    const int topic = i % config.topics;
    const int partner = (topic + 1) % config.topics;
    RawThread raw;
    char id[32];
    std::snprintf(id, sizeof(id), "q%04d", i);
    raw.thread_id = id;
    raw.split = i >= first_test  ? Split::kTest
                : i >= first_dev ? Split::kDev
                                 : Split::kTrain;
    raw.question = gen.Question(topic);

    std::vector<AnswerKind> kinds(n, AnswerKind::kDistractor);
    std::fill_n(kinds.begin(), num_relevant, AnswerKind::kRelevant);
    std::fill_n(kinds.begin() + num_relevant, num_confusable,
                AnswerKind::kConfusable);
    std::shuffle(kinds.begin(), kinds.end(), gen.rng());
    for (int j = 0; j < n; ++j) {
      RawCandidate c;
      char aid[48];
      std::snprintf(aid, sizeof(aid), "%s_a%02d", id, j);
      c.answer_id = aid;
      int answer_topic = partner;
      bool blocked = false;
      switch (kinds[j]) {
        case AnswerKind::kRelevant:
          c.text = gen.Answer(partner, /*blocked=*/false);
          c.relevant = true;
          break;
        case AnswerKind::kConfusable:
          blocked = true;
          c.text = gen.Answer(partner, blocked);
          break;
        case AnswerKind::kDistractor:
          // Never alternating in a topic some question is partnered with,
          // so a distractor stays irrelevant in every other thread's pool.
          blocked = gen.Uniform(0, 1) == 0;
          answer_topic =
              blocked ? gen.NonPartnerTopic(partner) : gen.NoiseTopic();
          c.text = gen.Answer(answer_topic, blocked);
          break;
      }
      out.answer_topic[c.answer_id] = answer_topic;
      out.answer_blocked[c.answer_id] = blocked;
      out.answer_kind[c.answer_id] = kinds[j];
      raw.candidates.push_back(std::move(c));
    }
    out.thread_topic.push_back(topic);
    builder.Add(raw);
  }
  out.corpus = std::move(builder).Finish();
  return out;
}

}  // namespace msm
