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

#ifndef MSMATCH_GRADCHECK_SUITE_H_
#define MSMATCH_GRADCHECK_SUITE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace msm {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
};

// Names of the primitives covered by the suite, in report order.
std::vector<std::string> GradCheckPrimitiveNames();

// Checks every primitive, the score function of a small seeded model
// (d = 8, K = 1, h_dim = 8), the discriminator loss and the generator
// surrogate, all at 64-bit.
GradCheckReport RunGradCheckSuite(std::uint64_t seed = 1,
                                  double tolerance = kGradCheckTolerance);

}  // namespace msm

#endif  // MSMATCH_GRADCHECK_SUITE_H_
