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

// Question threads, vocabulary and the canonical line-delimited JSON corpus
// format.

#ifndef MSMATCH_CORPUS_H_
#define MSMATCH_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace msm {

using TokenIds = std::vector<std::int32_t>;

// Sentences longer than this are truncated at the tail on ingestion.
inline constexpr std::size_t kMaxSentenceTokens = 200;

enum class Split { kTrain, kDev, kTest };

std::string_view SplitName(Split split);
// Throws ParseError for anything but "train", "dev" or "test".
Split ParseSplit(std::string_view name);

// Lowercases, splits on whitespace and emits each ASCII punctuation
// character as its own token.
std::vector<std::string> Tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();

  // Id of `token`, registering it when new.
  std::int32_t Add(std::string_view token);
  // Id of `token`, or kUnknown.
  std::int32_t Lookup(std::string_view token) const;
  const std::string& Token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct Candidate {
  std::string answer_id;
  TokenIds tokens;
  bool relevant = false;

  bool operator==(const Candidate&) const = default;
};

struct QuestionThread {
  std::string thread_id;
  TokenIds question;
  std::vector<Candidate> candidates;
  Split split = Split::kTrain;

  std::size_t NumRelevant() const;
  bool operator==(const QuestionThread&) const = default;
};

struct Corpus {
  std::vector<QuestionThread> threads;
  Vocabulary vocab;

  // Indices of threads tagged with `split`, in corpus order.
  std::vector<std::size_t> ThreadsIn(Split split) const;
  // Index of the thread with this id; throws CorpusError when absent.
  std::size_t FindThread(std::string_view thread_id) const;
  std::string Detokenize(std::span<const std::int32_t> tokens) const;

  bool operator==(const Corpus& other) const {
    return threads == other.threads && vocab == other.vocab;
  }
};

// Raw (untokenized) thread as it appears in an input file.
struct RawCandidate {
  std::string answer_id;
  std::string text;
  bool relevant = false;
};

struct RawThread {
  std::string thread_id;
  std::string question;
  std::vector<RawCandidate> candidates;
  Split split = Split::kTrain;
};

// Tokenizes raw threads into a corpus. Token ids are assigned in order of
// first appearance (question, then candidates). Empty texts are dropped with
// a warning on stderr; duplicate thread or answer ids raise IntegrityError.
class CorpusBuilder {
 public:
  void Add(const RawThread& raw);
  Corpus Finish() &&;

 private:
  TokenIds Encode(std::string_view text);

  Corpus corpus_;
  std::unordered_map<std::string, bool> thread_ids_;
  std::unordered_map<std::string, bool> answer_ids_;
};

// Checks every corpus invariant; throws IntegrityError naming the first
// violation.
void Validate(const Corpus& corpus);

// Re-expresses the corpus over `target` ids; unseen tokens map to kUnknown.
Corpus RemapToVocabulary(const Corpus& corpus, const Vocabulary& target);

// One JSON object per line:
// {"thread_id", "question", "candidates": [{"answer_id", "text",
// "relevant"}], "split"}.
Corpus LoadJsonl(const std::filesystem::path& path);
void SaveJsonl(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace msm

#endif  // MSMATCH_CORPUS_H_
