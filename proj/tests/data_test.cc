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
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "msmatch/corpus.h"
#include "msmatch/embeddings.h"
#include "msmatch/error.h"
#include "msmatch/semeval.h"
#include "msmatch/synth.h"

namespace msm {
namespace {

namespace fs = std::filesystem;

const fs::path kData = MSMATCH_TEST_DATA;

fs::path TempFile(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "msmatch_data_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string Join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

template <typename E>
std::string MessageOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected exception";
  return "";
}

TEST(TokenizeTest, Examples) {
  EXPECT_EQ(Tokenize("Does anyone know?"),
            (std::vector<std::string>{"does", "anyone", "know", "?"}));
  EXPECT_TRUE(Tokenize("").empty());
  EXPECT_TRUE(Tokenize("   \t\n").empty());
  EXPECT_EQ(Tokenize("Hi,there!!"),
            (std::vector<std::string>{"hi", ",", "there", "!", "!"}));
}

TEST(TokenizeTest, JoinThenRetokenizeIsIdentity) {
  const std::vector<std::string> texts = {
      "Does anyone know?", "It's 5:30 p.m., OK?!", "a--b (c) [d]",
      "MiXeD CaSe\twith\ttabs", "\"quoted\" text."};
  for (const std::string& text : texts) {
    const std::vector<std::string> once = Tokenize(text);
    EXPECT_EQ(Tokenize(Join(once)), once) << text;
  }
}

TEST(VocabularyTest, UnknownIsZeroAndIdsAreStable) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 1u);
  EXPECT_EQ(v.Token(Vocabulary::kUnknown), Vocabulary::kUnknownToken);
  EXPECT_EQ(v.Add("visa"), 1);
  EXPECT_EQ(v.Add("family"), 2);
  EXPECT_EQ(v.Add("visa"), 1);
  EXPECT_EQ(v.Lookup("family"), 2);
  EXPECT_EQ(v.Lookup("absent"), Vocabulary::kUnknown);
  EXPECT_THROW(v.Token(7), VocabularyError);
}

TEST(CorpusBuilderTest, DuplicateIdsAreIntegrityErrors) {
  CorpusBuilder builder;
  builder.Add({"t1", "q", {{"a1", "x", true}}, Split::kTrain});
  EXPECT_THROW(builder.Add({"t1", "q", {{"a2", "x", true}}, Split::kTrain}),
               IntegrityError);
  EXPECT_THROW(builder.Add({"t2", "q", {{"a1", "x", true}}, Split::kTrain}),
               IntegrityError);
}

TEST(CorpusBuilderTest, EmptyAnswersAreDropped) {
  CorpusBuilder builder;
  builder.Add(
      {"t1", "q", {{"a1", "x", true}, {"a2", "  ", false}}, Split::kTrain});
  Corpus c = std::move(builder).Finish();
  ASSERT_EQ(c.threads.size(), 1u);
  EXPECT_EQ(c.threads[0].candidates.size(), 1u);
}

TEST(JsonlTest, LoadsLabelsAndSplits) {
  Corpus c = LoadJsonl(kData / "two_threads.jsonl");
  ASSERT_EQ(c.threads.size(), 2u);
  const QuestionThread& t = c.threads[0];
  EXPECT_EQ(t.thread_id, "t1");
  ASSERT_EQ(t.candidates.size(), 2u);
  EXPECT_TRUE(t.candidates[0].relevant);
  EXPECT_FALSE(t.candidates[1].relevant);
  EXPECT_EQ(c.Detokenize(t.question), "does anyone know ?");
  EXPECT_EQ(c.threads[1].split, Split::kTest);
  // First-appearance order: question tokens get the smallest ids.
  EXPECT_EQ(c.vocab.Lookup("does"), 1);
  EXPECT_EQ(c.ThreadsIn(Split::kTest), std::vector<std::size_t>{1});
  EXPECT_EQ(c.FindThread("t2"), 1u);
  EXPECT_THROW(c.FindThread("zz"), CorpusError);
  EXPECT_NO_THROW(Validate(c));
}

TEST(JsonlTest, SaveLoadRoundTrip) {
  Corpus original = LoadJsonl(kData / "two_threads.jsonl");
  const fs::path path = TempFile("roundtrip.jsonl");
  SaveJsonl(original, path);
  EXPECT_EQ(LoadJsonl(path), original);

  SynthConfig config;
  config.num_threads = 12;
  config.answers_per_thread = 10;
  config.test_threads = 2;
  config.dev_threads = 2;
  Corpus synth = SynthGenerate(config).corpus;
  SaveJsonl(synth, path);
  EXPECT_EQ(LoadJsonl(path), synth);
}

TEST(JsonlTest, MissingRelevantNamesFieldAndLine) {
  const std::string message = MessageOf<ParseError>(
      [] { LoadJsonl(kData / "missing_relevant.jsonl"); });
  EXPECT_NE(message.find("relevant"), std::string::npos) << message;
  EXPECT_NE(message.find("line 2"), std::string::npos) << message;
}

TEST(JsonlTest, MalformedAndDuplicateRecords) {
  const fs::path path = TempFile("malformed.jsonl");
  {
    std::ofstream out(path);
    out << "{\"thread_id\":\"t1\",\"question\":\"q\",\"candidates\":[],"
           "\"split\":\"train\"}\n{not json\n";
  }
  const std::string message = MessageOf<ParseError>([&] { LoadJsonl(path); });
  EXPECT_NE(message.find("line 2"), std::string::npos) << message;
  EXPECT_THROW(LoadJsonl(kData / "duplicate_thread.jsonl"), IntegrityError);
  EXPECT_THROW(LoadJsonl(kData / "absent.jsonl"), FileError);
}

TEST(SemevalTest, MergesRelatedThreadsOfOneQuestion) {
  Corpus c = ImportSemevalXml(kData / "semeval_small.xml", Split::kDev);
  ASSERT_EQ(c.threads.size(), 2u);
  const QuestionThread& q1 = c.threads[0];
  EXPECT_EQ(q1.thread_id, "Q1");
  EXPECT_EQ(q1.split, Split::kDev);
  ASSERT_EQ(q1.candidates.size(), 4u);
  std::vector<std::string> ids;
  for (const Candidate& cand : q1.candidates) ids.push_back(cand.answer_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"Q1_R1_C1", "Q1_R1_C2", "Q1_R2_C1",
                                           "Q1_R2_C2"}));
  EXPECT_EQ(c.Detokenize(q1.question),
            "visa renewal how long does a family visa renewal take ?");
}

TEST(SemevalTest, RelevanceMatchesHandCount) {
  // Good labels in the fixture: Q1_R1_C1 and Q1_R2_C2. PotentiallyUseful
  // and Bad are irrelevant.
  Corpus c = ImportSemevalXml(kData / "semeval_small.xml");
  EXPECT_EQ(c.threads[0].NumRelevant(), 2u);
  EXPECT_TRUE(c.threads[0].candidates[0].relevant);
  EXPECT_FALSE(c.threads[0].candidates[2].relevant);
  EXPECT_TRUE(c.threads[0].candidates[3].relevant);
}

TEST(SemevalTest, AllBadThreadIsRetained) {
  Corpus c = ImportSemevalXml(kData / "semeval_small.xml");
  ASSERT_EQ(c.threads.size(), 2u);
  EXPECT_EQ(c.threads[1].thread_id, "Q2");
  EXPECT_EQ(c.threads[1].candidates.size(), 2u);
  EXPECT_EQ(c.threads[1].NumRelevant(), 0u);
}

TEST(SemevalTest, MissingLabelNamesComment) {
  const std::string message = MessageOf<ImportError>(
      [] { ImportSemevalXml(kData / "semeval_missing_label.xml"); });
  EXPECT_NE(message.find("Q9_R1_C7"), std::string::npos) << message;
}

TEST(SemevalTest, UnparsableFileIsImportError) {
  const fs::path path = TempFile("broken.xml");
  {
    std::ofstream out(path);
    out << "<root><OrgQuestion ORGQ_ID=\"Q\">";
  }
  EXPECT_THROW(ImportSemevalXml(path), ImportError);
}

Vocabulary FixtureVocabulary() {
  Vocabulary v;
  v.Add("visa");
  v.Add("family");
  v.Add("renewal");
  v.Add("office");
  return v;
}

TEST(EmbeddingsTest, FixtureRowsAreExact) {
  nn::Rng rng(3);
  EmbeddingLoad load =
      LoadEmbeddings(kData / "embeddings3.txt", FixtureVocabulary(), 3, rng);
  const std::vector<std::vector<double>> expected = {{0.0, 0.0, 0.0},
                                                     {0.5, -0.25, 1.0},
                                                     {0.125, 2.0, -3.5},
                                                     {-1.0, 0.0, 0.75}};
  const auto data = load.table.data();
  for (std::size_t r = 0; r < expected.size(); ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(data[r * 3 + c], expected[r][c]) << r << "," << c;
    }
  }
  // "office" is absent from the file and keeps its random row.
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_LE(std::abs(data[4 * 3 + c]), 0.1);
    EXPECT_NE(data[4 * 3 + c], 0.0);
  }
  EXPECT_EQ(load.matched, 3u);
  EXPECT_DOUBLE_EQ(load.coverage, 0.75);
}

TEST(EmbeddingsTest, FullCoverage) {
  Vocabulary v;
  v.Add("visa");
  v.Add("renewal");
  nn::Rng rng(3);
  EXPECT_DOUBLE_EQ(
      LoadEmbeddings(kData / "embeddings3.txt", v, 3, rng).coverage, 1.0);
}

TEST(EmbeddingsTest, EmptyFileGivesZeroCoverageAndRandomRows) {
  const fs::path path = TempFile("empty.txt");
  {
    std::ofstream out(path);
  }
  nn::Rng a(9), b(9);
  EmbeddingLoad load = LoadEmbeddings(path, FixtureVocabulary(), 4, a);
  EXPECT_EQ(load.coverage, 0.0);
  EXPECT_EQ(load.matched, 0u);
  nn::Tensor random = RandomEmbeddings(5, 4, b);
  const auto got = load.table.data();
  const auto want = random.data();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]);
}

TEST(EmbeddingsTest, WrongValueCountNamesLine) {
  nn::Rng rng(1);
  const std::string message = MessageOf<ParseError>([&] {
    LoadEmbeddings(kData / "embeddings_bad.txt", FixtureVocabulary(), 3, rng);
  });
  EXPECT_NE(message.find("line 2"), std::string::npos) << message;
}

SynthConfig ThousandCandidates(std::uint64_t seed) {
  SynthConfig config;
  config.num_threads = 40;
  config.answers_per_thread = 25;
  config.seed = seed;
  return config;
}

TEST(SynthTest, ShapeAndRelevantFraction) {
  SynthCorpus s = SynthGenerate(ThousandCandidates(4));
  ASSERT_EQ(s.corpus.threads.size(), 40u);
  std::size_t candidates = 0, relevant = 0;
  for (const QuestionThread& t : s.corpus.threads) {
    EXPECT_EQ(t.candidates.size(), 25u);
    EXPECT_GE(t.NumRelevant(), 1u);
    candidates += t.candidates.size();
    relevant += t.NumRelevant();
  }
  EXPECT_EQ(candidates, 1000u);
  EXPECT_NEAR(static_cast<double>(relevant) / candidates, 0.10, 0.02);
  EXPECT_EQ(s.corpus.ThreadsIn(Split::kTest).size(), 10u);
  EXPECT_NO_THROW(Validate(s.corpus));
}

TEST(SynthTest, PositivesShareNoTokenWithQuestion) {
  SynthCorpus s = SynthGenerate(ThousandCandidates(5));
  for (const QuestionThread& t : s.corpus.threads) {
    const std::set<std::int32_t> question(t.question.begin(), t.question.end());
    for (const Candidate& c : t.candidates) {
      if (!c.relevant) continue;
      for (std::int32_t id : c.tokens) {
        EXPECT_EQ(question.count(id), 0u) << t.thread_id << " " << c.answer_id;
      }
    }
  }
}

TEST(SynthTest, TwoTopicsStillPlantsRelevance) {
  SynthConfig config;
  config.topics = 2;
  config.num_threads = 6;
  config.answers_per_thread = 10;
  config.test_threads = 2;
  SynthCorpus s = SynthGenerate(config);
  for (std::size_t i = 0; i < s.corpus.threads.size(); ++i) {
    const QuestionThread& t = s.corpus.threads[i];
    EXPECT_GE(t.NumRelevant(), 1u);
    for (const Candidate& c : t.candidates) {
      if (c.relevant) {
        EXPECT_EQ(s.answer_topic.at(c.answer_id),
                  s.PartnerTopic(s.thread_topic[i]));
      }
    }
  }
}

TEST(SynthTest, HardNegativesAreBlockedPartnerAnswers) {
  SynthCorpus s = SynthGenerate(ThousandCandidates(6));
  std::size_t hard = 0;
  for (std::size_t i = 0; i < s.corpus.threads.size(); ++i) {
    for (const Candidate& c : s.corpus.threads[i].candidates) {
      const bool expected =
          !c.relevant && s.answer_blocked.at(c.answer_id) &&
          s.answer_topic.at(c.answer_id) == s.PartnerTopic(s.thread_topic[i]);
      EXPECT_EQ(s.IsHardNegative(i, c.answer_id), expected);
      hard += expected ? 1 : 0;
    }
  }
  EXPECT_GT(hard, 0u);
}

TEST(SynthTest, SeedReproducibility) {
  EXPECT_EQ(SynthGenerate(ThousandCandidates(11)).corpus,
            SynthGenerate(ThousandCandidates(11)).corpus);
  EXPECT_FALSE(SynthGenerate(ThousandCandidates(11)).corpus ==
               SynthGenerate(ThousandCandidates(12)).corpus);
}

TEST(SynthTest, InvalidConfigs) {
  auto bad = [](auto mutate) {
    SynthConfig config;
    mutate(config);
    return config;
  };
  EXPECT_THROW(SynthGenerate(bad([](SynthConfig& c) { c.topics = 1; })),
               ConfigError);
  EXPECT_THROW(
      SynthGenerate(bad([](SynthConfig& c) { c.vocab_per_topic = 1; })),
      ConfigError);
  EXPECT_THROW(SynthGenerate(bad([](SynthConfig& c) { c.noise_topics = 0; })),
               ConfigError);
  EXPECT_THROW(SynthGenerate(bad([](SynthConfig& c) { c.test_threads = 60; })),
               ConfigError);
  EXPECT_THROW(
      SynthGenerate(bad([](SynthConfig& c) { c.relevant_fraction = 1.5; })),
      ConfigError);
  EXPECT_THROW(SynthGenerate(bad([](SynthConfig& c) { c.answer_min_len = 0; })),
               ConfigError);
}

}  // namespace
}  // namespace msm
