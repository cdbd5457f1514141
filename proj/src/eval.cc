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

#include "msmatch/eval.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "msmatch/error.h"

namespace msm {

RankedList RankByScores(const QuestionThread& thread,
                        std::span<const double> scores) {
  if (scores.size() != thread.candidates.size()) {
    throw ContractError(
        "rank: " + std::to_string(scores.size()) + " scores for " +
        std::to_string(thread.candidates.size()) + " candidates");
  }
  RankedList out;
  out.thread_id = thread.thread_id;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Candidate& c = thread.candidates[i];
    out.entries.push_back({c.answer_id, scores[i], c.relevant});
    out.num_relevant += c.relevant ? 1 : 0;
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.answer_id < b.answer_id;
            });
  return out;
}

RankedList Rank(const QuestionThread& thread, MatchingModel& model) {
  std::vector<const TokenIds*> answers;
  for (const Candidate& c : thread.candidates) answers.push_back(&c.tokens);
  const std::vector<double> scores =
      model.ScoreCandidates(thread.question, answers);
  return RankByScores(thread, scores);
}

std::optional<double> AveragePrecisionAt10(const RankedList& ranked) {
  if (ranked.num_relevant == 0) return std::nullopt;
  const std::size_t cutoff = std::min(kMetricCutoff, ranked.entries.size());
  double hits = 0.0, total = 0.0;
  for (std::size_t k = 0; k < cutoff; ++k) {
    if (!ranked.entries[k].relevant) continue;
    hits += 1.0;
    total += hits / static_cast<double>(k + 1);
  }
  return total /
         static_cast<double>(std::min(ranked.num_relevant, kMetricCutoff));
}

std::optional<double> ReciprocalRankAt10(const RankedList& ranked) {
  if (ranked.num_relevant == 0) return std::nullopt;
  const std::size_t cutoff = std::min(kMetricCutoff, ranked.entries.size());
  for (std::size_t k = 0; k < cutoff; ++k) {
    if (ranked.entries[k].relevant) return 1.0 / static_cast<double>(k + 1);
  }
  return 0.0;
}

namespace {

template <typename Fn>
double MeanOverIncluded(std::span<const RankedList> lists, Fn&& metric) {
  double total = 0.0;
  std::size_t count = 0;
  for (const RankedList& list : lists) {
    if (auto value = metric(list)) {
      total += *value;
      ++count;
    }
  }
  if (count == 0) {
    throw EvaluationError("no thread with a relevant candidate to evaluate");
  }
  return total / static_cast<double>(count);
}

}  // namespace

double MapAt10(std::span<const RankedList> lists) {
  return MeanOverIncluded(lists, AveragePrecisionAt10);
}

double MrrAt10(std::span<const RankedList> lists) {
  return MeanOverIncluded(lists, ReciprocalRankAt10);
}

Metrics Evaluate(std::span<const RankedList> lists) {
  Metrics m;
  m.map = MapAt10(lists);
  m.mrr = MrrAt10(lists);
  for (const RankedList& l : lists) m.threads += l.num_relevant > 0 ? 1 : 0;
  return m;
}

Metrics EvaluateSplit(const Corpus& corpus, Split split, MatchingModel& model,
                      std::vector<RankedList>* ranked) {
  std::vector<RankedList> lists;
  for (std::size_t i : corpus.ThreadsIn(split)) {
    lists.push_back(Rank(corpus.threads[i], model));
  }
  Metrics m = Evaluate(lists);
  if (ranked) *ranked = std::move(lists);
  return m;
}

void FormatPredictions(const RankedList& list, std::ostream& out) {
  char score[64];
  for (std::size_t k = 0; k < list.entries.size(); ++k) {
    std::snprintf(score, sizeof(score), "%.17g", list.entries[k].score);
    out << list.thread_id << '\t' << list.entries[k].answer_id << '\t' << score
        << '\t' << (k + 1) << '\n';
  }
}

void WritePredictions(std::span<const RankedList> lists,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write predictions " + path.string());
  for (const RankedList& list : lists) FormatPredictions(list, out);
  if (!out) throw FileError("write failed for " + path.string());
}

std::vector<Prediction> ReadPredictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Prediction p;
    if (!(fields >> p.thread_id >> p.answer_id >> p.score >> p.rank)) {
      throw ParseError("prediction line " + std::to_string(line_no) +
                       " is malformed");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace msm
