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

#include "msmatch/adam.h"

#include <cmath>
#include <string>

#include "msmatch/error.h"

namespace msm::nn {

void AdamStep(std::span<double> param, std::span<const double> grad,
              std::span<double> first_moment, std::span<double> second_moment,
              std::int64_t step, double learning_rate,
              const AdamOptions& options) {
  if (grad.size() != param.size() || first_moment.size() != param.size() ||
      second_moment.size() != param.size()) {
    throw DimensionError("adam: parameter of " + std::to_string(param.size()) +
                         " elements paired with gradient of " +
                         std::to_string(grad.size()));
  }
  if (step < 1) throw ContractError("adam: step index starts at 1");
  const double correction1 =
      1.0 - std::pow(options.beta1, static_cast<double>(step));
  const double correction2 =
      1.0 - std::pow(options.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    first_moment[i] =
        options.beta1 * first_moment[i] + (1.0 - options.beta1) * g;
    second_moment[i] =
        options.beta2 * second_moment[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = first_moment[i] / correction1;
    const double v_hat = second_moment[i] / correction2;
    param[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + options.eps);
  }
}

double ScheduledLearningRate(int epoch, double base, double factor, int every) {
  if (epoch < 0 || every <= 0 || factor <= 0.0) {
    throw ConfigError("invalid learning-rate schedule");
  }
  return base / std::pow(factor, epoch / every);
}

Adam::Adam(std::vector<Tensor> params, double learning_rate,
           AdamOptions options)
    : params_(std::move(params)),
      learning_rate_(learning_rate),
      options_(options) {
  for (const Tensor& p : params_) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

void Adam::Step() {
  ++step_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    std::span<double> grad = p.mutable_grad();
    AdamStep(p.mutable_data(), grad, first_[k], second_[k], step_,
             learning_rate_, options_);
  }
}

void Adam::ZeroGrad() {
  for (Tensor& p : params_) p.ZeroGrad();
}

}  // namespace msm::nn
