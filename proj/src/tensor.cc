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

#include "msmatch/tensor.h"

#include <numeric>
#include <sstream>
#include <utility>

#include "msmatch/error.h"

namespace msm::nn {

namespace {

thread_local bool strict_mode = false;
thread_local std::string backward_fault;

template <typename Real>
BasicTape<Real>*& ActiveTapeSlot() {
  thread_local BasicTape<Real>* tape = nullptr;
  return tape;
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

template <typename Real>
BasicTensor<Real>::BasicTensor() = default;

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, std::vector<Real> values,
                               bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           ShapeString(shape));
    }
  }
  if (NumElements(shape) != values.size()) {
    throw DimensionError("shape " + ShapeString(shape) + " needs " +
                         std::to_string(NumElements(shape)) +
                         " elements, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  set_requires_grad(requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::Zeros(Shape shape, bool requires_grad) {
  return Filled(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::Filled(Shape shape, Real value,
                                            bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return BasicTensor(std::move(shape), std::vector<Real>(n, value),
                     requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::Scalar(Real value, bool requires_grad) {
  return BasicTensor(Shape{}, std::vector<Real>{value}, requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::FromNode(std::shared_ptr<NodeType> node) {
  return BasicTensor(std::move(node));
}

template <typename Real>
std::size_t BasicTensor<Real>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + ShapeString(shape()));
  }
  return node_->shape[axis];
}

template <typename Real>
Real BasicTensor<Real>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) {
    throw DimensionError("at(row, col) needs a matrix, got " +
                         ShapeString(shape()));
  }
  return node_->value[row * node_->shape[1] + col];
}

template <typename Real>
Real BasicTensor<Real>::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->value[0];
}

template <typename Real>
void BasicTensor<Real>::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (flag) {
    node_->EnsureGrad();
  } else {
    node_->grad.clear();
  }
}

template <typename Real>
std::span<Real> BasicTensor<Real>::mutable_grad() {
  node_->EnsureGrad();
  return node_->grad;
}

template <typename Real>
void BasicTensor<Real>::ZeroGrad() {
  if (!node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
  }
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::Clone() const {
  BasicTensor copy(node_->shape, node_->value, node_->requires_grad);
  if (!node_->grad.empty()) copy.node_->grad = node_->grad;
  return copy;
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::Detach() const {
  return BasicTensor(node_->shape, node_->value, false);
}

template <typename Real>
void BasicTape<Real>::Record(std::shared_ptr<Node<Real>> node) {
  nodes_.push_back(std::move(node));
}

template <typename Real>
void BasicTape<Real>::Backward(const BasicTensor<Real>& output) {
  if (!output.defined() || output.size() != 1) {
    throw ContractError("backward needs a single-element output, got " +
                        (output.defined() ? ShapeString(output.shape())
                                          : std::string("undefined")));
  }
  auto& root = *output.node();
  if (!root.requires_grad) return;
  root.EnsureGrad();
  root.grad[0] += Real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<Real>& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
}

template <typename Real>
BasicTape<Real>* ActiveTape() {
  return ActiveTapeSlot<Real>();
}

template <typename Real>
TapeScope<Real>::TapeScope(BasicTape<Real>& tape)
    : previous_(ActiveTapeSlot<Real>()) {
  ActiveTapeSlot<Real>() = &tape;
}

template <typename Real>
TapeScope<Real>::~TapeScope() {
  ActiveTapeSlot<Real>() = previous_;
}

template <typename Real>
NoGradScope<Real>::NoGradScope() : previous_(ActiveTapeSlot<Real>()) {
  ActiveTapeSlot<Real>() = nullptr;
}

template <typename Real>
NoGradScope<Real>::~NoGradScope() {
  ActiveTapeSlot<Real>() = previous_;
}

bool StrictMode() { return strict_mode; }

StrictModeScope::StrictModeScope(bool enabled) : previous_(strict_mode) {
  strict_mode = enabled;
}

StrictModeScope::~StrictModeScope() { strict_mode = previous_; }

void SetBackwardFault(std::string op_name) {
  backward_fault = std::move(op_name);
}

bool BackwardFaulted(const char* op_name) {
  return !backward_fault.empty() && backward_fault == op_name;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template BasicTape<float>* ActiveTape<float>();
template BasicTape<double>* ActiveTape<double>();

}  // namespace msm::nn
