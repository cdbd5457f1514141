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

#ifndef MSMATCH_GRADCHECK_H_
#define MSMATCH_GRADCHECK_H_

#include <functional>
#include <span>

#include "msmatch/tensor.h"

namespace msm::nn {

// Compares reverse-mode gradients of the scalar f with central differences
// of step h over every coordinate of `inputs` (which must require grad).
// Returns max |analytic - numeric| / max(1, |analytic|, |numeric|).
//
// f is re-evaluated 2N+1 times and must be deterministic: disable dropout,
// and keep any batchnorm batch fixed.
double GradCheck(const std::function<Tensor()>& f,
                 std::span<const Tensor> inputs, double h = 1e-5);

}  // namespace msm::nn

#endif  // MSMATCH_GRADCHECK_H_
