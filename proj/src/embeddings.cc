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

#include "msmatch/embeddings.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msmatch/error.h"

namespace msm {

nn::Tensor RandomEmbeddings(std::size_t vocab_size, std::size_t dim,
                            nn::Rng& rng) {
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  std::vector<double> values(vocab_size * dim, 0.0);
  for (std::size_t i = dim; i < values.size(); ++i) values[i] = uniform(rng);
  return nn::Tensor({vocab_size, dim}, std::move(values));
}

EmbeddingLoad LoadEmbeddings(const std::filesystem::path& path,
                             const Vocabulary& vocab, std::size_t dim,
                             nn::Rng& rng) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open embedding file " + path.string());
  EmbeddingLoad result;
  result.table = RandomEmbeddings(vocab.size(), dim, rng);
  std::span<double> rows = result.table.mutable_data();
  std::vector<bool> seen(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    values.clear();
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("embedding line " + std::to_string(line_no) +
                         ": bad number \"" + field + "\"");
      }
      values.push_back(v);
    }
    if (values.size() != dim) {
      throw ParseError("embedding line " + std::to_string(line_no) +
                       ": expected " + std::to_string(dim) + " values, got " +
                       std::to_string(values.size()));
    }
    const std::int32_t id = vocab.Lookup(token);
    if (id == Vocabulary::kUnknown || seen[id]) continue;
    seen[id] = true;
    std::copy(values.begin(), values.end(), rows.begin() + id * dim);
    ++result.matched;
  }
  if (vocab.size() > 1) {
    result.coverage = static_cast<double>(result.matched) /
                      static_cast<double>(vocab.size() - 1);
  }
  return result;
}

}  // namespace msm
