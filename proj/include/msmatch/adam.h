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

#ifndef MSMATCH_ADAM_H_
#define MSMATCH_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "msmatch/tensor.h"

namespace msm::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of `param` in place. `step` is the 1-based
// index of this update. Throws DimensionError when the spans disagree.
void AdamStep(std::span<double> param, std::span<const double> grad,
              std::span<double> first_moment, std::span<double> second_moment,
              std::int64_t step, double learning_rate,
              const AdamOptions& options);

// Learning rate at `epoch` under step decay: base / factor^floor(epoch/every).
double ScheduledLearningRate(int epoch, double base = 1e-4, double factor = 5.0,
                             int every = 10);

// Adam over a fixed parameter list. Reads each parameter's accumulated
// gradient, so callers run Backward first and ZeroGrad afterwards.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double learning_rate = 1e-4,
                AdamOptions options = {});

  void Step();
  void ZeroGrad();

  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr) { learning_rate_ = lr; }
  std::int64_t step() const { return step_; }
  const AdamOptions& options() const { return options_; }
  std::span<const Tensor> params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::int64_t step_ = 0;
  double learning_rate_;
  AdamOptions options_;
};

}  // namespace msm::nn

#endif  // MSMATCH_ADAM_H_
