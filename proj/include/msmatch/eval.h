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

// Ranking and top-10 evaluation measures.

#ifndef MSMATCH_EVAL_H_
#define MSMATCH_EVAL_H_

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msmatch/corpus.h"
#include "msmatch/model.h"

namespace msm {

inline constexpr std::size_t kMetricCutoff = 10;

struct RankedEntry {
  std::string answer_id;
  double score = 0.0;
  bool relevant = false;
};

struct RankedList {
  std::string thread_id;
  // Descending score; ties in ascending answer id.
  std::vector<RankedEntry> entries;
  // Relevant candidates in the whole thread (not only those ranked).
  std::size_t num_relevant = 0;
};

// Sorts a thread's candidates by the given scores (parallel to candidates).
RankedList RankByScores(const QuestionThread& thread,
                        std::span<const double> scores);

// Scores every candidate with the model in eval mode and sorts.
RankedList Rank(const QuestionThread& thread, MatchingModel& model);

// AP over the top 10, normalized by min(R, 10). nullopt when R = 0.
std::optional<double> AveragePrecisionAt10(const RankedList& ranked);
// 1/rank of the first relevant entry within the top 10, else 0. nullopt
// when R = 0.
std::optional<double> ReciprocalRankAt10(const RankedList& ranked);

// Means over lists with at least one relevant candidate. EvaluationError
// when there is none.
double MapAt10(std::span<const RankedList> lists);
double MrrAt10(std::span<const RankedList> lists);

struct Metrics {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t threads = 0;
};

Metrics Evaluate(std::span<const RankedList> lists);

// Ranks every thread of the split and evaluates the result.
Metrics EvaluateSplit(const Corpus& corpus, Split split, MatchingModel& model,
                      std::vector<RankedList>* ranked = nullptr);

// One "thread_id<TAB>answer_id<TAB>score<TAB>rank" line per candidate, in
// rank order; rank is 1-based and scores use round-trip precision.
void FormatPredictions(const RankedList& list, std::ostream& out);
void WritePredictions(std::span<const RankedList> lists,
                      const std::filesystem::path& path);

struct Prediction {
  std::string thread_id;
  std::string answer_id;
  double score = 0.0;
  int rank = 0;
};

std::vector<Prediction> ReadPredictions(const std::filesystem::path& path);

}  // namespace msm

#endif  // MSMATCH_EVAL_H_
