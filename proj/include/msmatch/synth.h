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

// Seeded synthetic question-answer corpus with planted relevance structure.
//
// Every topic owns a disjoint token set split into "head" and "tail" words.
// A thread's question draws from its own topic. Relevant answers draw from
// the partner topic (topic + 1 mod T) and alternate head, tail, head, ...,
// so they share no token with the question. Confusable answers use the same
// partner-topic words but place all heads before all tails: a bag of words
// cannot tell them apart from relevant answers, an ngram feature can.
// Distractors are either block-ordered answers from any topic other than the
// partner (the question's own included: lexical overlap without relevance)
// or alternating answers from noise topics that no question is partnered
// with. Either way an answer looks relevant only to questions of the topic
// before its own, so other threads' answers are honest negatives in a pool.

#ifndef MSMATCH_SYNTH_H_
#define MSMATCH_SYNTH_H_

#include <cstdint>
#include <string>
#include <unordered_map>

#include "msmatch/corpus.h"

namespace msm {

struct SynthConfig {
  int num_threads = 50;
  int answers_per_thread = 30;
  int topics = 8;
  int vocab_per_topic = 20;
  // Topics no question is partnered with; distractor vocabulary only.
  int noise_topics = 2;
  std::uint64_t seed = 1;
  // The last test_threads threads are tagged test, the dev_threads before
  // them dev, the rest train.
  int dev_threads = 0;
  int test_threads = 10;
  double relevant_fraction = 0.1;
  double confusable_fraction = 0.2;
  int question_min_len = 6;
  int question_max_len = 10;
  int answer_min_len = 8;
  int answer_max_len = 12;
};

enum class AnswerKind { kRelevant, kConfusable, kDistractor };

struct SynthCorpus {
  Corpus corpus;
  int topics = 0;
  // Topic of each thread's question, by thread index.
  std::vector<int> thread_topic;
  // Token topic and kind of every answer, by answer id.
  std::unordered_map<std::string, int> answer_topic;
  std::unordered_map<std::string, AnswerKind> answer_kind;
  // Heads-then-tails word order instead of alternating.
  std::unordered_map<std::string, bool> answer_blocked;

  int PartnerTopic(int topic) const { return (topic + 1) % topics; }
  // True for a block-ordered answer from the partner topic of the thread's
  // question: same words as a positive, wrong order.
  bool IsHardNegative(std::size_t thread, const std::string& answer_id) const;
};

// Throws ConfigError for topics < 2, vocab_per_topic < 2, noise_topics < 1
// or inconsistent counts. Bitwise reproducible for a fixed config.
SynthCorpus SynthGenerate(const SynthConfig& config);

}  // namespace msm

#endif  // MSMATCH_SYNTH_H_
