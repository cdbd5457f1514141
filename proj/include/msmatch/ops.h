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

// Differentiable operations over BasicTensor. Every operation records a
// backward rule on the active tape when at least one input requires a
// gradient. Layouts follow the model: sequences are (channels x length),
// matching grids are (rows x cols x width).

#ifndef MSMATCH_OPS_H_
#define MSMATCH_OPS_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "msmatch/tensor.h"

namespace msm::nn {

enum class Mode { kTrain, kEval };

using Rng = std::mt19937_64;

template <typename Real>
using T = BasicTensor<Real>;

// (r x k) * (k x c) -> (r x c).
template <typename Real>
T<Real> MatMul(const T<Real>& a, const T<Real>& b);

template <typename Real>
T<Real> Transpose(const T<Real>& x);

template <typename Real>
T<Real> Add(const T<Real>& a, const T<Real>& b);

template <typename Real>
T<Real> Sub(const T<Real>& a, const T<Real>& b);

// Elementwise product of equal shapes.
template <typename Real>
T<Real> Mul(const T<Real>& a, const T<Real>& b);

template <typename Real>
T<Real> Scale(const T<Real>& x, Real factor);

// (r x c) + bias[c], broadcast over rows. A vector input is treated as 1 x c.
template <typename Real>
T<Real> AddRowBias(const T<Real>& x, const T<Real>& bias);

template <typename Real>
T<Real> Relu(const T<Real>& x);

template <typename Real>
T<Real> Sigmoid(const T<Real>& x);

// log(max(x, floor)); zero gradient where the floor is active.
template <typename Real>
T<Real> ClampedLog(const T<Real>& x, Real floor);

// Max-shifted softmax along `axis`.
template <typename Real>
T<Real> Softmax(const T<Real>& x, std::size_t axis);

template <typename Real>
T<Real> LogSoftmax(const T<Real>& x, std::size_t axis);

// Sum of all elements, as a scalar.
template <typename Real>
T<Real> Sum(const T<Real>& x);

template <typename Real>
T<Real> SumSquares(const T<Real>& x);

// Reductions drop `axis` from the shape. ReduceMax routes the gradient to
// the first maximal element.
template <typename Real>
T<Real> ReduceMean(const T<Real>& x, std::size_t axis);

template <typename Real>
T<Real> ReduceMax(const T<Real>& x, std::size_t axis);

template <typename Real>
T<Real> Concat(std::span<const T<Real>> xs, std::size_t axis);

// Half-open range [begin, end) along `axis`.
template <typename Real>
T<Real> Slice(const T<Real>& x, std::size_t axis, std::size_t begin,
              std::size_t end);

template <typename Real>
T<Real> Reshape(const T<Real>& x, Shape shape);

// Rows of a (V x d) table selected by ids -> (n x d). Gradients scatter-add.
template <typename Real>
T<Real> GatherRows(const T<Real>& table, std::span<const std::int32_t> ids);

// out[i][j][:] = a[i][:] + b[j][:] for a (m x h) and b (n x h).
template <typename Real>
T<Real> PairwiseAdd(const T<Real>& a, const T<Real>& b);

// Kernel-3, stride-1 cross-correlation with one zero frame of padding on
// each side. x: (c_in x L), weight: (c_out x c_in x 3), bias: (c_out).
template <typename Real>
T<Real> Conv1d(const T<Real>& x, const T<Real>& weight, const T<Real>& bias);

template <typename Real>
struct BatchNormState {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;
  Real momentum = Real(0.1);
  Real eps = Real(1e-5);

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, Real(0)), running_var(channels, Real(1)) {}
};

// Per-channel normalization of a (C x L) input. Train mode normalizes with
// the batch statistics over L and folds them into `state`; eval mode uses
// the running statistics.
template <typename Real>
T<Real> BatchNorm1d(const T<Real>& x, const T<Real>& gamma, const T<Real>& beta,
                    BatchNormState<Real>& state, Mode mode);

// Window 3, stride 2, one zero frame of padding each side:
// (C x L) -> (C x ceil(L/2)).
template <typename Real>
T<Real> MaxPool1d(const T<Real>& x);

// Inverted dropout. Identity in eval mode or at rate 0.
template <typename Real>
T<Real> Dropout(const T<Real>& x, double rate, Mode mode, Rng& rng);

}  // namespace msm::nn

#endif  // MSMATCH_OPS_H_
