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

#include "msmatch/corpus.h"

#include <cctype>
#include <fstream>
#include <iostream>
#include <string>

#include "json.hpp"

#include "msmatch/error.h"

namespace msm {

namespace {

using nlohmann::json;

bool IsPunct(unsigned char c) { return c < 128 && std::ispunct(c); }
bool IsSpace(unsigned char c) { return c < 128 && std::isspace(c); }

const json& RequireField(const json& object, const char* field,
                         std::size_t line) {
  auto it = object.find(field);
  if (it == object.end()) {
    throw ParseError("line " + std::to_string(line) + ": missing field \"" +
                     field + "\"");
  }
  return *it;
}

std::string RequireString(const json& object, const char* field,
                          std::size_t line) {
  const json& value = RequireField(object, field, line);
  if (!value.is_string()) {
    throw ParseError("line " + std::to_string(line) + ": field \"" + field +
                     "\" must be a string");
  }
  return value.get<std::string>();
}

}  // namespace

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ParseError("unknown split \"" + std::string(name) + "\"");
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c)) {
      flush();
    } else if (IsPunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kUnknownToken);
  ids_.emplace(std::string(kUnknownToken), kUnknown);
}

std::int32_t Vocabulary::Add(std::string_view token) {
  auto [it, inserted] = ids_.try_emplace(
      std::string(token), static_cast<std::int32_t>(tokens_.size()));
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::int32_t Vocabulary::Lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::Token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) +
                          " outside vocabulary of " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::size_t QuestionThread::NumRelevant() const {
  std::size_t n = 0;
  for (const Candidate& c : candidates) n += c.relevant ? 1 : 0;
  return n;
}

std::vector<std::size_t> Corpus::ThreadsIn(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    if (threads[i].split == split) out.push_back(i);
  }
  return out;
}

std::size_t Corpus::FindThread(std::string_view thread_id) const {
  for (std::size_t i = 0; i < threads.size(); ++i) {
    if (threads[i].thread_id == thread_id) return i;
  }
  throw CorpusError("unknown thread id \"" + std::string(thread_id) + "\"");
}

std::string Corpus::Detokenize(std::span<const std::int32_t> tokens) const {
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text.push_back(' ');
    text += vocab.Token(tokens[i]);
  }
  return text;
}

TokenIds CorpusBuilder::Encode(std::string_view text) {
  std::vector<std::string> tokens = Tokenize(text);
  if (tokens.size() > kMaxSentenceTokens) tokens.resize(kMaxSentenceTokens);
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(corpus_.vocab.Add(t));
  return ids;
}

void CorpusBuilder::Add(const RawThread& raw) {
  if (!thread_ids_.emplace(raw.thread_id, true).second) {
    throw IntegrityError("duplicate thread id \"" + raw.thread_id + "\"");
  }
  QuestionThread thread;
  thread.thread_id = raw.thread_id;
  thread.split = raw.split;
  thread.question = Encode(raw.question);
  for (const RawCandidate& c : raw.candidates) {
    if (!answer_ids_.emplace(c.answer_id, true).second) {
      throw IntegrityError("duplicate answer id \"" + c.answer_id + "\"");
    }
    TokenIds tokens = Encode(c.text);
    if (tokens.empty()) {
      std::cerr << "warning: dropping empty answer " << c.answer_id << "\n";
      continue;
    }
    thread.candidates.push_back({c.answer_id, std::move(tokens), c.relevant});
  }
  if (thread.question.empty()) {
    std::cerr << "warning: dropping thread " << raw.thread_id
              << " with empty question\n";
    return;
  }
  corpus_.threads.push_back(std::move(thread));
}

Corpus CorpusBuilder::Finish() && { return std::move(corpus_); }

void Validate(const Corpus& corpus) {
  std::unordered_map<std::string, bool> threads, answers;
  const auto vocab_size = static_cast<std::int32_t>(corpus.vocab.size());
  auto check_tokens = [&](const TokenIds& ids, const std::string& owner) {
    if (ids.empty()) throw IntegrityError("empty sequence in " + owner);
    for (std::int32_t id : ids) {
      if (id < 0 || id >= vocab_size) {
        throw IntegrityError("token id " + std::to_string(id) + " in " + owner +
                             " outside vocabulary");
      }
    }
  };
  for (const QuestionThread& t : corpus.threads) {
    if (!threads.emplace(t.thread_id, true).second) {
      throw IntegrityError("duplicate thread id \"" + t.thread_id + "\"");
    }
    check_tokens(t.question, "question " + t.thread_id);
    for (const Candidate& c : t.candidates) {
      if (!answers.emplace(c.answer_id, true).second) {
        throw IntegrityError("duplicate answer id \"" + c.answer_id + "\"");
      }
      check_tokens(c.tokens, "answer " + c.answer_id);
    }
  }
}

Corpus RemapToVocabulary(const Corpus& corpus, const Vocabulary& target) {
  Corpus out;
  out.vocab = target;
  out.threads = corpus.threads;
  auto remap = [&](TokenIds& ids) {
    for (std::int32_t& id : ids) id = target.Lookup(corpus.vocab.Token(id));
  };
  for (QuestionThread& t : out.threads) {
    remap(t.question);
    for (Candidate& c : t.candidates) remap(c.tokens);
  }
  return out;
}

Corpus LoadJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open corpus file " + path.string());
  CorpusBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": record is not an object");
    }
    RawThread raw;
    raw.thread_id = RequireString(record, "thread_id", line_no);
    raw.question = RequireString(record, "question", line_no);
    raw.split = ParseSplit(RequireString(record, "split", line_no));
    const json& candidates = RequireField(record, "candidates", line_no);
    if (!candidates.is_array()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": field \"candidates\" must be an array");
    }
    for (const json& c : candidates) {
      if (!c.is_object()) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": candidate is not an object");
      }
      RawCandidate rc;
      rc.answer_id = RequireString(c, "answer_id", line_no);
      rc.text = RequireString(c, "text", line_no);
      const json& relevant = RequireField(c, "relevant", line_no);
      if (!relevant.is_boolean()) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": field \"relevant\" must be a boolean");
      }
      rc.relevant = relevant.get<bool>();
      raw.candidates.push_back(std::move(rc));
    }
    try {
      builder.Add(raw);
    } catch (const IntegrityError& e) {
      throw IntegrityError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return std::move(builder).Finish();
}

void SaveJsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write corpus file " + path.string());
  for (const QuestionThread& t : corpus.threads) {
    nlohmann::ordered_json record;
    record["thread_id"] = t.thread_id;
    record["question"] = corpus.Detokenize(t.question);
    record["candidates"] = nlohmann::ordered_json::array();
    for (const Candidate& c : t.candidates) {
      nlohmann::ordered_json cand;
      cand["answer_id"] = c.answer_id;
      cand["text"] = corpus.Detokenize(c.tokens);
      cand["relevant"] = c.relevant;
      record["candidates"].push_back(std::move(cand));
    }
    record["split"] = std::string(SplitName(t.split));
    out << record.dump() << "\n";
  }
  if (!out) throw FileError("write failed for " + path.string());
}

}  // namespace msm
