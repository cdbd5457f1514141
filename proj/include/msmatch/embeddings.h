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

#ifndef MSMATCH_EMBEDDINGS_H_
#define MSMATCH_EMBEDDINGS_H_

#include <filesystem>

#include "msmatch/corpus.h"
#include "msmatch/ops.h"

namespace msm {

struct EmbeddingLoad {
  // (vocab.size() x dim). Row 0 (unknown) is all zeros.
  nn::Tensor table;
  std::size_t matched = 0;
  // matched / (vocab.size() - 1); 0 for a vocabulary of only <unk>.
  double coverage = 0.0;
};

// Uniform(-0.1, 0.1) rows, except row 0 which is zero.
nn::Tensor RandomEmbeddings(std::size_t vocab_size, std::size_t dim,
                            nn::Rng& rng);

// Reads a GloVe-style text file ("token v1 ... vdim" per line). Rows for
// in-vocabulary tokens are copied verbatim; the rest keep their random
// initialization. A line with the wrong number of values raises ParseError
// with its line number.
EmbeddingLoad LoadEmbeddings(const std::filesystem::path& path,
                             const Vocabulary& vocab, std::size_t dim,
                             nn::Rng& rng);

}  // namespace msm

#endif  // MSMATCH_EMBEDDINGS_H_
