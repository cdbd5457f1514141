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

#include "msmatch/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "msmatch/error.h"

namespace msm::nn {

double GradCheck(const std::function<Tensor()>& f,
                 std::span<const Tensor> inputs, double h) {
  std::vector<Tensor> params(inputs.begin(), inputs.end());
  for (Tensor& p : params) {
    if (!p.requires_grad()) {
      throw ContractError("gradcheck: every input must require grad");
    }
    p.ZeroGrad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor out;
    {
      TapeScope<double> scope(tape);
      out = f();
    }
    if (out.size() != 1) {
      throw ContractError("gradcheck: function output has shape " +
                          ShapeString(out.shape()) + ", expected a scalar");
    }
    tape.Backward(out);
  }
  for (Tensor& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    p.ZeroGrad();
  }

  NoGradScope<double> no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::span<double> x = params[k].mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + h;
      const double up = f().item();
      x[i] = saved - h;
      const double down = f().item();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace msm::nn
