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

#ifndef MSMATCH_SEMEVAL_H_
#define MSMATCH_SEMEVAL_H_

#include <filesystem>

#include "msmatch/corpus.h"

namespace msm {

// Imports a SemEval Task 3 Subtask C file. Each <OrgQuestion> becomes one
// thread (repeated OrgQuestion elements with the same ORGQ_ID are merged);
// its candidates are the <RelComment>s of all related threads. Only
// RELC_RELEVANCE2ORGQ="Good" is relevant. A comment without that attribute
// raises ImportError naming the comment id.
Corpus ImportSemevalXml(const std::filesystem::path& path,
                        Split split = Split::kTrain);

}  // namespace msm

#endif  // MSMATCH_SEMEVAL_H_
