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

// Dense row-major tensors with an optional gradient slot, plus the tape that
// records operations for reverse-mode differentiation.
//
// A tensor is a handle: copies share storage. Use Clone() for a deep copy.
// Operations only record backward rules while a tape is active on the
// calling thread (see TapeScope); without one they are plain forward math.

#ifndef MSMATCH_TENSOR_H_
#define MSMATCH_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace msm::nn {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> value;
  // Empty until a gradient reaches this node.
  std::vector<Real> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  void EnsureGrad() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
  }
};

template <typename Real>
class BasicTensor {
 public:
  using NodeType = Node<Real>;

  BasicTensor();
  BasicTensor(Shape shape, std::vector<Real> values,
              bool requires_grad = false);

  static BasicTensor Zeros(Shape shape, bool requires_grad = false);
  static BasicTensor Filled(Shape shape, Real value,
                            bool requires_grad = false);
  static BasicTensor Scalar(Real value, bool requires_grad = false);
  static BasicTensor FromNode(std::shared_ptr<NodeType> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const Real> data() const { return node_->value; }
  std::span<Real> mutable_data() { return node_->value; }
  Real operator[](std::size_t i) const { return node_->value[i]; }
  Real at(std::size_t row, std::size_t col) const;
  // Value of a one-element tensor.
  Real item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  // Empty span when no gradient has been accumulated.
  std::span<const Real> grad() const { return node_->grad; }
  std::span<Real> mutable_grad();
  void ZeroGrad();

  BasicTensor Clone() const;
  // Same values, no gradient, no history.
  BasicTensor Detach() const;

  const std::shared_ptr<NodeType>& node() const { return node_; }

 private:
  explicit BasicTensor(std::shared_ptr<NodeType> node)
      : node_(std::move(node)) {}
  std::shared_ptr<NodeType> node_;
};

// Append-only record of differentiable operations in execution order.
// Creation order is a topological order, so Backward walks it in reverse.
template <typename Real>
class BasicTape {
 public:
  void Record(std::shared_ptr<Node<Real>> node);
  // Seeds d(output)/d(output) = 1 and propagates to every requires_grad leaf.
  // Throws ContractError if output is not a single element.
  void Backward(const BasicTensor<Real>& output);
  std::size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node<Real>>> nodes_;
};

// Tape that receives operations on this thread, or nullptr.
template <typename Real>
BasicTape<Real>* ActiveTape();

template <typename Real>
class TapeScope {
 public:
  explicit TapeScope(BasicTape<Real>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  BasicTape<Real>* previous_;
};

// Disables recording on this thread for the lifetime of the guard.
template <typename Real>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  BasicTape<Real>* previous_;
};

// Strict mode: every operation verifies its output is finite and throws
// NumericError naming the operation otherwise. Thread-local.
bool StrictMode();
class StrictModeScope {
 public:
  explicit StrictModeScope(bool enabled = true);
  ~StrictModeScope();
  StrictModeScope(const StrictModeScope&) = delete;
  StrictModeScope& operator=(const StrictModeScope&) = delete;

 private:
  bool previous_;
};

// Fault injection for the gradient checker's self-test: when set, the
// backward rule of the named operation scales its input gradients by 1.5.
// Thread-local; empty string disables.
void SetBackwardFault(std::string op_name);
bool BackwardFaulted(const char* op_name);

using Tensor = BasicTensor<double>;
using Tape = BasicTape<double>;
using Tensor32 = BasicTensor<float>;
using Tape32 = BasicTape<float>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class BasicTape<float>;
extern template class BasicTape<double>;
extern template class TapeScope<float>;
extern template class TapeScope<double>;
extern template class NoGradScope<float>;
extern template class NoGradScope<double>;

}  // namespace msm::nn

#endif  // MSMATCH_TENSOR_H_
