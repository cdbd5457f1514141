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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "msmatch/error.h"
#include "msmatch/eval.h"
#include "oracles.h"

namespace msm {
namespace {

RankedList ListFromLabels(const std::vector<bool>& labels,
                          std::size_t extra_relevant = 0) {
  RankedList list;
  list.thread_id = "t";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    list.entries.push_back({"a" + std::to_string(i),
                            static_cast<double>(labels.size() - i), labels[i]});
    list.num_relevant += labels[i] ? 1 : 0;
  }
  list.num_relevant += extra_relevant;
  return list;
}

TEST(MetricsTest, AveragePrecisionExamples) {
  // Relevant at ranks 1 and 3: (1/1 + 2/3) / 2.
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels({1, 0, 1, 0})),
                   (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels({1, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels({0, 0, 0, 1})), 0.25);
  EXPECT_DOUBLE_EQ(*ReciprocalRankAt10(ListFromLabels({0, 0, 0, 1})), 0.25);
}

TEST(MetricsTest, RelevantBelowCutoffCountsInDenominator) {
  std::vector<bool> labels(12, false);
  labels[0] = true;
  labels[11] = true;
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels(labels)), 0.5);
  labels[0] = false;
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels(labels)), 0.0);
  EXPECT_DOUBLE_EQ(*ReciprocalRankAt10(ListFromLabels(labels)), 0.0);
}

TEST(MetricsTest, DenominatorIsCappedAtTen) {
  std::vector<bool> labels(15, true);
  EXPECT_DOUBLE_EQ(*AveragePrecisionAt10(ListFromLabels(labels)), 1.0);
}

TEST(MetricsTest, ZeroRelevantThreadsAreExcluded) {
  std::vector<RankedList> lists = {ListFromLabels({0, 0, 0}),
                                   ListFromLabels({0, 1}),
                                   ListFromLabels({1, 0})};
  EXPECT_FALSE(AveragePrecisionAt10(lists[0]).has_value());
  EXPECT_FALSE(ReciprocalRankAt10(lists[0]).has_value());
  EXPECT_DOUBLE_EQ(MapAt10(lists), 0.75);
  EXPECT_DOUBLE_EQ(MrrAt10(lists), 0.75);
  EXPECT_EQ(Evaluate(lists).threads, 2u);
}

TEST(MetricsTest, NothingToEvaluateIsAnError) {
  std::vector<RankedList> lists = {ListFromLabels({0, 0})};
  EXPECT_THROW(MapAt10(lists), EvaluationError);
  EXPECT_THROW(MrrAt10(std::vector<RankedList>{}), EvaluationError);
}

TEST(MetricsTest, AgreesWithDirectDefinition) {
  std::mt19937_64 rng(2024);
  std::vector<RankedList> lists;
  std::vector<std::optional<double>> ap, rr;
  for (int i = 0; i < 50; ++i) {
    const oracle::MetricInstance inst = oracle::RandomMetricInstance(rng, i);
    lists.push_back(RankByScores(inst.thread, inst.scores));
    const std::vector<bool> labels = oracle::RankedLabels(inst);
    ap.push_back(oracle::DirectAp(labels));
    rr.push_back(oracle::DirectRr(labels));
    const auto got_ap = AveragePrecisionAt10(lists.back());
    ASSERT_EQ(got_ap.has_value(), ap.back().has_value());
    if (got_ap) {
      EXPECT_NEAR(*got_ap, *ap.back(), 1e-12);
      EXPECT_NEAR(*ReciprocalRankAt10(lists.back()), *rr.back(), 1e-12);
    }
  }
  EXPECT_NEAR(MapAt10(lists), *oracle::MeanDefined(ap), 1e-12);
  EXPECT_NEAR(MrrAt10(lists), *oracle::MeanDefined(rr), 1e-12);
}

TEST(RankTest, SortsByScoreThenAnswerId) {
  QuestionThread t;
  t.thread_id = "q";
  t.candidates = {{"b", {1}, false}, {"a", {1}, true}, {"c", {1}, false}};
  RankedList list = RankByScores(t, std::vector<double>{1.0, 1.0, 2.0});
  ASSERT_EQ(list.entries.size(), 3u);
  EXPECT_EQ(list.entries[0].answer_id, "c");
  EXPECT_EQ(list.entries[1].answer_id, "a");
  EXPECT_EQ(list.entries[2].answer_id, "b");
  EXPECT_EQ(list.num_relevant, 1u);
  EXPECT_THROW(RankByScores(t, std::vector<double>{1.0}), ContractError);
}

TEST(PredictionsTest, RoundTripPreservesScoresExactly) {
  QuestionThread t;
  t.thread_id = "q7";
  t.candidates = {{"x", {1}, true}, {"y", {1}, false}, {"z", {1}, false}};
  const std::vector<double> scores = {0.1, -1.0 / 3.0, 2.5e-17};
  std::vector<RankedList> lists = {RankByScores(t, scores)};
  const auto path =
      std::filesystem::temp_directory_path() / "msmatch_predictions.tsv";
  WritePredictions(lists, path);
  const std::vector<Prediction> read = ReadPredictions(path);
  ASSERT_EQ(read.size(), 3u);
  for (std::size_t k = 0; k < read.size(); ++k) {
    EXPECT_EQ(read[k].thread_id, "q7");
    EXPECT_EQ(read[k].answer_id, lists[0].entries[k].answer_id);
    EXPECT_EQ(read[k].score, lists[0].entries[k].score);
    EXPECT_EQ(read[k].rank, static_cast<int>(k) + 1);
  }
  std::ostringstream formatted;
  FormatPredictions(lists[0], formatted);
  EXPECT_EQ(formatted.str().substr(0, 5), "q7\tx\t");
  EXPECT_EQ(std::stod(formatted.str().substr(5)), 0.1);
}

TEST(PredictionsTest, MalformedLineIsParseError) {
  const auto path =
      std::filesystem::temp_directory_path() / "msmatch_bad_predictions.tsv";
  {
    std::ofstream out(path);
    out << "q\ta\t1.0\t1\nq\tb\tnot-a-number\t2\n";
  }
  EXPECT_THROW(ReadPredictions(path), ParseError);
  EXPECT_THROW(ReadPredictions(path.string() + ".absent"), FileError);
}

}  // namespace
}  // namespace msm
