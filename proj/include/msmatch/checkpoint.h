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

// Model checkpoints. Layout:
//
//   MSMATCH-CHECKPOINT 1\n
//   <one-line JSON header: config, seed, vocabulary, tensor table>\n
//   <raw little-endian float64 payload, tensors in header order>
//
// Values are stored bit-for-bit, so save -> load -> save is byte-identical.

#ifndef MSMATCH_CHECKPOINT_H_
#define MSMATCH_CHECKPOINT_H_

#include <filesystem>

#include "msmatch/corpus.h"
#include "msmatch/model.h"

namespace msm {

struct Checkpoint {
  MatchingModel model;
  Vocabulary vocab;
};

void SaveCheckpoint(const MatchingModel& model, const Vocabulary& vocab,
                    const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace msm

#endif  // MSMATCH_CHECKPOINT_H_
