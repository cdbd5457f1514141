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

#include "msmatch/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "msmatch/error.h"

namespace msm::nn {

namespace {

template <typename Real>
using NodePtr = std::shared_ptr<Node<Real>>;

template <typename Real>
void CheckFinite(const char* op, const std::vector<Real>& values) {
  for (Real v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

// Wraps freshly computed values into a tensor and, when a tape is active and
// any input needs a gradient, attaches the backward rule.
template <typename Real, typename Backward>
T<Real> MakeResult(const char* op, Shape shape, std::vector<Real> values,
                   std::vector<NodePtr<Real>> inputs, Backward&& backward) {
  if (StrictMode()) CheckFinite(op, values);
  auto node = std::make_shared<Node<Real>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  BasicTape<Real>* tape = ActiveTape<Real>();
  const bool needs_grad =
      tape != nullptr &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const NodePtr<Real>& n) { return n->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = [op,
                      fn = std::forward<Backward>(backward)](Node<Real>& self) {
      if (BackwardFaulted(op)) {
        for (Real& g : self.grad) g *= Real(1.5);
      }
      fn(self);
    };
    tape->Record(node);
  }
  return T<Real>::FromNode(std::move(node));
}

// Gradient buffer of input `i`, or nullptr when it does not need one.
template <typename Real>
Real* InputGrad(Node<Real>& self, std::size_t i) {
  Node<Real>& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.EnsureGrad();
  return in.grad.data();
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void CheckAxis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + ShapeString(shape));
  }
}

Shape DropAxis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

void RequireMatrix(const char* op, const Shape& shape) {
  if (shape.size() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         ShapeString(shape));
  }
}

void RequireSameShape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeString(a) + " vs " + ShapeString(b));
  }
}

// c[r x n] += a[r x k] * b[k x n]
template <typename Real>
void GemmNN(const Real* __restrict a, const Real* __restrict b,
            Real* __restrict c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      if (av == Real(0)) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[r x k] += a[r x n] * b[k x n]^T
template <typename Real>
void GemmNT(const Real* __restrict a, const Real* __restrict b,
            Real* __restrict c, std::size_t r, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    const Real* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real* brow = b + p * n;
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[r x k]^T * b[r x n]
template <typename Real>
void GemmTN(const Real* __restrict a, const Real* __restrict b,
            Real* __restrict c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    const Real* arow = a + i * k;
    const Real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      if (av == Real(0)) continue;
      Real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Real>
T<Real> Elementwise(const char* op, const T<Real>& x, auto forward,
                    auto derivative) {
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return MakeResult<Real>(op, x.shape(), std::move(out), {x.node()},
                          [derivative](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            const auto& xin = self.inputs[0]->value;
                            for (std::size_t i = 0; i < xin.size(); ++i) {
                              gx[i] += self.grad[i] *
                                       derivative(xin[i], self.value[i]);
                            }
                          });
}

}  // namespace

template <typename Real>
T<Real> MatMul(const T<Real>& a, const T<Real>& b) {
  RequireMatrix("matmul", a.shape());
  RequireMatrix("matmul", b.shape());
  const std::size_t r = a.dim(0), k = a.dim(1), c = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ for " +
                         ShapeString(a.shape()) + " and " +
                         ShapeString(b.shape()));
  }
  std::vector<Real> out(r * c, Real(0));
  GemmNN(a.data().data(), b.data().data(), out.data(), r, k, c);
  return MakeResult<Real>("matmul", Shape{r, c}, std::move(out),
                          {a.node(), b.node()}, [r, k, c](Node<Real>& self) {
                            const Real* av = self.inputs[0]->value.data();
                            const Real* bv = self.inputs[1]->value.data();
                            if (Real* ga = InputGrad(self, 0)) {
                              GemmNT(self.grad.data(), bv, ga, r, c, k);
                            }
                            if (Real* gb = InputGrad(self, 1)) {
                              GemmTN(av, self.grad.data(), gb, r, k, c);
                            }
                          });
}

template <typename Real>
T<Real> Transpose(const T<Real>& x) {
  RequireMatrix("transpose", x.shape());
  const std::size_t r = x.dim(0), c = x.dim(1);
  const auto in = x.data();
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  }
  return MakeResult<Real>("transpose", Shape{c, r}, std::move(out), {x.node()},
                          [r, c](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            for (std::size_t i = 0; i < r; ++i) {
                              for (std::size_t j = 0; j < c; ++j) {
                                gx[i * c + j] += self.grad[j * r + i];
                              }
                            }
                          });
}

template <typename Real>
T<Real> Add(const T<Real>& a, const T<Real>& b) {
  RequireSameShape("add", a.shape(), b.shape());
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return MakeResult<Real>("add", a.shape(), std::move(out),
                          {a.node(), b.node()}, [](Node<Real>& self) {
                            for (std::size_t s = 0; s < 2; ++s) {
                              if (Real* g = InputGrad(self, s)) {
                                for (std::size_t i = 0; i < self.grad.size();
                                     ++i)
                                  g[i] += self.grad[i];
                              }
                            }
                          });
}

template <typename Real>
T<Real> Sub(const T<Real>& a, const T<Real>& b) {
  RequireSameShape("sub", a.shape(), b.shape());
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return MakeResult<Real>("sub", a.shape(), std::move(out),
                          {a.node(), b.node()}, [](Node<Real>& self) {
                            if (Real* g = InputGrad(self, 0)) {
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                g[i] += self.grad[i];
                            }
                            if (Real* g = InputGrad(self, 1)) {
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                g[i] -= self.grad[i];
                            }
                          });
}

template <typename Real>
T<Real> Mul(const T<Real>& a, const T<Real>& b) {
  RequireSameShape("mul", a.shape(), b.shape());
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return MakeResult<Real>("mul", a.shape(), std::move(out),
                          {a.node(), b.node()}, [](Node<Real>& self) {
                            const auto& av = self.inputs[0]->value;
                            const auto& bv = self.inputs[1]->value;
                            if (Real* g = InputGrad(self, 0)) {
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                g[i] += self.grad[i] * bv[i];
                            }
                            if (Real* g = InputGrad(self, 1)) {
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                g[i] += self.grad[i] * av[i];
                            }
                          });
}

template <typename Real>
T<Real> Scale(const T<Real>& x, Real factor) {
  return Elementwise<Real>(
      "scale", x, [factor](Real v) { return v * factor; },
      [factor](Real, Real) { return factor; });
}

template <typename Real>
T<Real> AddRowBias(const T<Real>& x, const T<Real>& bias) {
  if (bias.rank() != 1 || x.rank() < 1 || x.rank() > 2 ||
      x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_row_bias: cannot broadcast " +
                         ShapeString(bias.shape()) + " over " +
                         ShapeString(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  const std::size_t r = x.size() / c;
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias[j];
  }
  return MakeResult<Real>("add_row_bias", x.shape(), std::move(out),
                          {x.node(), bias.node()}, [r, c](Node<Real>& self) {
                            if (Real* g = InputGrad(self, 0)) {
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                g[i] += self.grad[i];
                            }
                            if (Real* g = InputGrad(self, 1)) {
                              for (std::size_t i = 0; i < r; ++i) {
                                for (std::size_t j = 0; j < c; ++j)
                                  g[j] += self.grad[i * c + j];
                              }
                            }
                          });
}

template <typename Real>
T<Real> Relu(const T<Real>& x) {
  return Elementwise<Real>(
      "relu", x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real in, Real) { return in > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
T<Real> Sigmoid(const T<Real>& x) {
  return Elementwise<Real>(
      "sigmoid", x,
      [](Real v) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real out) { return out * (Real(1) - out); });
}

template <typename Real>
T<Real> ClampedLog(const T<Real>& x, Real floor) {
  return Elementwise<Real>(
      "clamped_log", x,
      [floor](Real v) { return std::log(std::max(v, floor)); },
      [floor](Real in, Real) { return in > floor ? Real(1) / in : Real(0); });
}

template <typename Real>
T<Real> Softmax(const T<Real>& x, std::size_t axis) {
  CheckAxis("softmax", x.shape(), axis);
  const AxisSplit s = SplitAt(x.shape(), axis);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t q = 0; q < s.inner; ++q) {
      const std::size_t base = o * s.len * s.inner + q;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t l = 0; l < s.len; ++l)
        mx = std::max(mx, in[base + l * s.inner]);
      Real total = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const Real e = std::exp(in[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return MakeResult<Real>(
      "softmax", x.shape(), std::move(out), {x.node()}, [s](Node<Real>& self) {
        Real* gx = InputGrad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t q = 0; q < s.inner; ++q) {
            const std::size_t base = o * s.len * s.inner + q;
            Real dot = 0;
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t idx = base + l * s.inner;
              dot += self.grad[idx] * self.value[idx];
            }
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t idx = base + l * s.inner;
              gx[idx] += self.value[idx] * (self.grad[idx] - dot);
            }
          }
        }
      });
}

template <typename Real>
T<Real> LogSoftmax(const T<Real>& x, std::size_t axis) {
  CheckAxis("log_softmax", x.shape(), axis);
  const AxisSplit s = SplitAt(x.shape(), axis);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t q = 0; q < s.inner; ++q) {
      const std::size_t base = o * s.len * s.inner + q;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t l = 0; l < s.len; ++l)
        mx = std::max(mx, in[base + l * s.inner]);
      Real total = 0;
      for (std::size_t l = 0; l < s.len; ++l)
        total += std::exp(in[base + l * s.inner] - mx);
      const Real log_norm = mx + std::log(total);
      for (std::size_t l = 0; l < s.len; ++l)
        out[base + l * s.inner] = in[base + l * s.inner] - log_norm;
    }
  }
  return MakeResult<Real>(
      "log_softmax", x.shape(), std::move(out), {x.node()},
      [s](Node<Real>& self) {
        Real* gx = InputGrad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t q = 0; q < s.inner; ++q) {
            const std::size_t base = o * s.len * s.inner + q;
            Real total = 0;
            for (std::size_t l = 0; l < s.len; ++l)
              total += self.grad[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t idx = base + l * s.inner;
              gx[idx] += self.grad[idx] - std::exp(self.value[idx]) * total;
            }
          }
        }
      });
}

template <typename Real>
T<Real> Sum(const T<Real>& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return MakeResult<Real>("sum", Shape{}, std::vector<Real>{total}, {x.node()},
                          [](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            const std::size_t n = self.inputs[0]->value.size();
                            for (std::size_t i = 0; i < n; ++i)
                              gx[i] += self.grad[0];
                          });
}

template <typename Real>
T<Real> SumSquares(const T<Real>& x) {
  Real total = 0;
  for (Real v : x.data()) total += v * v;
  return MakeResult<Real>("sum_squares", Shape{}, std::vector<Real>{total},
                          {x.node()}, [](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            const auto& xin = self.inputs[0]->value;
                            for (std::size_t i = 0; i < xin.size(); ++i)
                              gx[i] += Real(2) * xin[i] * self.grad[0];
                          });
}

template <typename Real>
T<Real> ReduceMean(const T<Real>& x, std::size_t axis) {
  CheckAxis("reduce_mean", x.shape(), axis);
  const AxisSplit s = SplitAt(x.shape(), axis);
  const auto in = x.data();
  std::vector<Real> out(s.outer * s.inner, Real(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const Real* row = in.data() + (o * s.len + l) * s.inner;
      Real* dst = out.data() + o * s.inner;
      for (std::size_t q = 0; q < s.inner; ++q) dst[q] += row[q];
    }
  }
  const Real inv = Real(1) / static_cast<Real>(s.len);
  for (Real& v : out) v *= inv;
  return MakeResult<Real>(
      "reduce_mean", DropAxis(x.shape(), axis), std::move(out), {x.node()},
      [s, inv](Node<Real>& self) {
        Real* gx = InputGrad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t l = 0; l < s.len; ++l) {
            Real* dst = gx + (o * s.len + l) * s.inner;
            const Real* src = self.grad.data() + o * s.inner;
            for (std::size_t q = 0; q < s.inner; ++q) dst[q] += src[q] * inv;
          }
        }
      });
}

template <typename Real>
T<Real> ReduceMax(const T<Real>& x, std::size_t axis) {
  CheckAxis("reduce_max", x.shape(), axis);
  const AxisSplit s = SplitAt(x.shape(), axis);
  const auto in = x.data();
  std::vector<Real> out(s.outer * s.inner);
  std::vector<std::size_t> argmax(s.outer * s.inner, 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const Real* first = in.data() + o * s.len * s.inner;
    Real* dst = out.data() + o * s.inner;
    std::size_t* arg = argmax.data() + o * s.inner;
    std::copy(first, first + s.inner, dst);
    for (std::size_t l = 1; l < s.len; ++l) {
      const Real* row = first + l * s.inner;
      for (std::size_t q = 0; q < s.inner; ++q) {
        if (row[q] > dst[q]) {
          dst[q] = row[q];
          arg[q] = l;
        }
      }
    }
  }
  return MakeResult<Real>(
      "reduce_max", DropAxis(x.shape(), axis), std::move(out), {x.node()},
      [s, argmax = std::move(argmax)](Node<Real>& self) {
        Real* gx = InputGrad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t q = 0; q < s.inner; ++q) {
            const std::size_t r = o * s.inner + q;
            gx[(o * s.len + argmax[r]) * s.inner + q] += self.grad[r];
          }
        }
      });
}

template <typename Real>
T<Real> Concat(std::span<const T<Real>> xs, std::size_t axis) {
  if (xs.empty()) throw EmptySequenceError("concat of zero tensors");
  const Shape& first = xs[0].shape();
  CheckAxis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& x : xs) {
    const Shape& sh = x.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t i = 0; ok && i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: " + ShapeString(sh) +
                           " incompatible with " + ShapeString(first) +
                           " along axis " + std::to_string(axis));
    }
    lens.push_back(sh[axis]);
    out_shape[axis] += sh[axis];
  }
  const AxisSplit s = SplitAt(out_shape, axis);
  std::vector<Real> out(NumElements(out_shape));
  std::vector<NodePtr<Real>> inputs;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto in = xs[k].data();
    const std::size_t chunk = lens[k] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy(in.begin() + o * chunk, in.begin() + (o + 1) * chunk,
                out.begin() + o * s.len * s.inner + offset * s.inner);
    }
    offset += lens[k];
    inputs.push_back(xs[k].node());
  }
  return MakeResult<Real>("concat", std::move(out_shape), std::move(out),
                          std::move(inputs), [s, lens](Node<Real>& self) {
                            std::size_t offset = 0;
                            for (std::size_t k = 0; k < lens.size(); ++k) {
                              const std::size_t chunk = lens[k] * s.inner;
                              if (Real* g = InputGrad(self, k)) {
                                for (std::size_t o = 0; o < s.outer; ++o) {
                                  const Real* src = self.grad.data() +
                                                    o * s.len * s.inner +
                                                    offset * s.inner;
                                  Real* dst = g + o * chunk;
                                  for (std::size_t i = 0; i < chunk; ++i)
                                    dst[i] += src[i];
                                }
                              }
                              offset += lens[k];
                            }
                          });
}

template <typename Real>
T<Real> Slice(const T<Real>& x, std::size_t axis, std::size_t begin,
              std::size_t end) {
  CheckAxis("slice", x.shape(), axis);
  if (begin >= end || end > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " +
                         ShapeString(x.shape()));
  }
  const AxisSplit s = SplitAt(x.shape(), axis);
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  const auto in = x.data();
  std::vector<Real> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy(in.begin() + (o * s.len + begin) * s.inner,
              in.begin() + (o * s.len + end) * s.inner,
              out.begin() + o * len * s.inner);
  }
  return MakeResult<Real>("slice", std::move(out_shape), std::move(out),
                          {x.node()}, [s, begin, len](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              const Real* src =
                                  self.grad.data() + o * len * s.inner;
                              Real* dst = gx + (o * s.len + begin) * s.inner;
                              for (std::size_t i = 0; i < len * s.inner; ++i)
                                dst[i] += src[i];
                            }
                          });
}

template <typename Real>
T<Real> Reshape(const T<Real>& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw DimensionError("reshape: " + ShapeString(x.shape()) + " to " +
                         ShapeString(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return MakeResult<Real>("reshape", std::move(shape), std::move(out),
                          {x.node()}, [](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              gx[i] += self.grad[i];
                          });
}

template <typename Real>
T<Real> GatherRows(const T<Real>& table, std::span<const std::int32_t> ids) {
  RequireMatrix("gather_rows", table.shape());
  if (ids.empty()) throw EmptySequenceError("gather_rows: no row ids");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  const auto src = table.data();
  std::vector<Real> out(ids.size() * d);
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw ContractError("gather_rows: id " + std::to_string(ids[i]) +
                          " outside table of " + std::to_string(rows) +
                          " rows");
    }
    std::copy_n(src.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  return MakeResult<Real>("gather_rows", Shape{ids.size(), d}, std::move(out),
                          {table.node()},
                          [saved = std::move(saved), d](Node<Real>& self) {
                            Real* gt = InputGrad(self, 0);
                            if (!gt) return;
                            for (std::size_t i = 0; i < saved.size(); ++i) {
                              Real* dst = gt + saved[i] * d;
                              const Real* g = self.grad.data() + i * d;
                              for (std::size_t j = 0; j < d; ++j)
                                dst[j] += g[j];
                            }
                          });
}

template <typename Real>
T<Real> PairwiseAdd(const T<Real>& a, const T<Real>& b) {
  RequireMatrix("pairwise_add", a.shape());
  RequireMatrix("pairwise_add", b.shape());
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("pairwise_add: widths differ for " +
                         ShapeString(a.shape()) + " and " +
                         ShapeString(b.shape()));
  }
  const std::size_t m = a.dim(0), n = b.dim(0), h = a.dim(1);
  const Real* av = a.data().data();
  const Real* bv = b.data().data();
  std::vector<Real> out(m * n * h);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real* dst = out.data() + (i * n + j) * h;
      for (std::size_t k = 0; k < h; ++k)
        dst[k] = av[i * h + k] + bv[j * h + k];
    }
  }
  return MakeResult<Real>("pairwise_add", Shape{m, n, h}, std::move(out),
                          {a.node(), b.node()}, [m, n, h](Node<Real>& self) {
                            Real* ga = InputGrad(self, 0);
                            Real* gb = InputGrad(self, 1);
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < n; ++j) {
                                const Real* g =
                                    self.grad.data() + (i * n + j) * h;
                                if (ga) {
                                  for (std::size_t k = 0; k < h; ++k)
                                    ga[i * h + k] += g[k];
                                }
                                if (gb) {
                                  for (std::size_t k = 0; k < h; ++k)
                                    gb[j * h + k] += g[k];
                                }
                              }
                            }
                          });
}

template <typename Real>
T<Real> Conv1d(const T<Real>& x, const T<Real>& weight, const T<Real>& bias) {
  RequireMatrix("conv1d", x.shape());
  if (weight.rank() != 3 || weight.dim(2) != 3 || weight.dim(1) != x.dim(0) ||
      bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw DimensionError("conv1d: weight " + ShapeString(weight.shape()) +
                         " / bias " + ShapeString(bias.shape()) +
                         " incompatible with input " + ShapeString(x.shape()));
  }
  const std::size_t cin = x.dim(0), len = x.dim(1), cout = weight.dim(0);
  if (len == 0) throw EmptySequenceError("conv1d on empty sequence");
  const std::size_t rows = cin * 3;
  // im2col: col[c*3 + k][t] = x[c][t + k - 1], zero outside the sequence.
  std::vector<Real> col(rows * len, Real(0));
  const auto xin = x.data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t k = 0; k < 3; ++k) {
      Real* dst = col.data() + (c * 3 + k) * len;
      for (std::size_t t = 0; t < len; ++t) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - 1;
        if (src >= 0 && static_cast<std::size_t>(src) < len)
          dst[t] = xin[c * len + src];
      }
    }
  }
  std::vector<Real> out(cout * len);
  for (std::size_t o = 0; o < cout; ++o) {
    std::fill_n(out.begin() + o * len, len, bias[o]);
  }
  GemmNN(weight.data().data(), col.data(), out.data(), cout, rows, len);
  return MakeResult<Real>(
      "conv1d", Shape{cout, len}, std::move(out),
      {x.node(), weight.node(), bias.node()},
      [cin, len, cout, rows, col = std::move(col)](Node<Real>& self) {
        const Real* dy = self.grad.data();
        if (Real* gw = InputGrad(self, 1)) {
          GemmNT(dy, col.data(), gw, cout, len, rows);
        }
        if (Real* gb = InputGrad(self, 2)) {
          for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t t = 0; t < len; ++t) gb[o] += dy[o * len + t];
          }
        }
        if (Real* gx = InputGrad(self, 0)) {
          std::vector<Real> dcol(rows * len, Real(0));
          GemmTN(self.inputs[1]->value.data(), dy, dcol.data(), cout, rows,
                 len);
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t k = 0; k < 3; ++k) {
              const Real* src = dcol.data() + (c * 3 + k) * len;
              for (std::size_t t = 0; t < len; ++t) {
                const std::ptrdiff_t pos =
                    static_cast<std::ptrdiff_t>(t + k) - 1;
                if (pos >= 0 && static_cast<std::size_t>(pos) < len)
                  gx[c * len + pos] += src[t];
              }
            }
          }
        }
      });
}

template <typename Real>
T<Real> BatchNorm1d(const T<Real>& x, const T<Real>& gamma, const T<Real>& beta,
                    BatchNormState<Real>& state, Mode mode) {
  RequireMatrix("batchnorm1d", x.shape());
  const std::size_t channels = x.dim(0), len = x.dim(1);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels} ||
      state.running_mean.size() != channels ||
      state.running_var.size() != channels) {
    throw DimensionError("batchnorm1d: parameters do not match " +
                         std::to_string(channels) + " channels");
  }
  const auto in = x.data();
  std::vector<Real> xhat(channels * len);
  std::vector<Real> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const Real* row = in.data() + c * len;
    Real mean, var;
    if (mode == Mode::kTrain) {
      mean = 0;
      for (std::size_t t = 0; t < len; ++t) mean += row[t];
      mean /= static_cast<Real>(len);
      var = 0;
      for (std::size_t t = 0; t < len; ++t)
        var += (row[t] - mean) * (row[t] - mean);
      var /= static_cast<Real>(len);
      state.running_mean[c] =
          (Real(1) - state.momentum) * state.running_mean[c] +
          state.momentum * mean;
      state.running_var[c] = (Real(1) - state.momentum) * state.running_var[c] +
                             state.momentum * var;
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    inv_std[c] = Real(1) / std::sqrt(var + state.eps);
    for (std::size_t t = 0; t < len; ++t) {
      xhat[c * len + t] = (row[t] - mean) * inv_std[c];
    }
  }
  std::vector<Real> out(channels * len);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < len; ++t) {
      out[c * len + t] = gamma[c] * xhat[c * len + t] + beta[c];
    }
  }
  const bool train = mode == Mode::kTrain;
  return MakeResult<Real>(
      "batchnorm1d", x.shape(), std::move(out),
      {x.node(), gamma.node(), beta.node()},
      [channels, len, train, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<Real>& self) {
        const Real* dy = self.grad.data();
        const auto& g = self.inputs[1]->value;
        Real* gx = InputGrad(self, 0);
        Real* gg = InputGrad(self, 1);
        Real* gb = InputGrad(self, 2);
        const Real n = static_cast<Real>(len);
        for (std::size_t c = 0; c < channels; ++c) {
          Real sum_dy = 0, sum_dy_xhat = 0;
          for (std::size_t t = 0; t < len; ++t) {
            sum_dy += dy[c * len + t];
            sum_dy_xhat += dy[c * len + t] * xhat[c * len + t];
          }
          if (gg) gg[c] += sum_dy_xhat;
          if (gb) gb[c] += sum_dy;
          if (!gx) continue;
          if (train) {
            const Real k = g[c] * inv_std[c] / n;
            for (std::size_t t = 0; t < len; ++t) {
              gx[c * len + t] += k * (n * dy[c * len + t] - sum_dy -
                                      xhat[c * len + t] * sum_dy_xhat);
            }
          } else {
            for (std::size_t t = 0; t < len; ++t) {
              gx[c * len + t] += dy[c * len + t] * g[c] * inv_std[c];
            }
          }
        }
      });
}

template <typename Real>
T<Real> MaxPool1d(const T<Real>& x) {
  RequireMatrix("maxpool1d", x.shape());
  const std::size_t channels = x.dim(0), len = x.dim(1);
  if (len == 0) throw EmptySequenceError("maxpool1d on empty sequence");
  const std::size_t out_len = (len + 1) / 2;
  const auto in = x.data();
  std::vector<Real> out(channels * out_len);
  // Source index per output, or len when the zero pad wins.
  std::vector<std::size_t> source(channels * out_len);
  for (std::size_t c = 0; c < channels; ++c) {
    const Real* row = in.data() + c * len;
    for (std::size_t i = 0; i < out_len; ++i) {
      Real best = 0;
      std::size_t arg = len;
      bool have = false;
      for (std::ptrdiff_t k = -1; k <= 1; ++k) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(2 * i) + k;
        const bool inside = pos >= 0 && static_cast<std::size_t>(pos) < len;
        const Real v = inside ? row[pos] : Real(0);
        if (!have || v > best) {
          best = v;
          arg = inside ? static_cast<std::size_t>(pos) : len;
          have = true;
        }
      }
      out[c * out_len + i] = best;
      source[c * out_len + i] = arg;
    }
  }
  return MakeResult<Real>(
      "maxpool1d", Shape{channels, out_len}, std::move(out), {x.node()},
      [channels, len, out_len, source = std::move(source)](Node<Real>& self) {
        Real* gx = InputGrad(self, 0);
        if (!gx) return;
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t i = 0; i < out_len; ++i) {
            const std::size_t src = source[c * out_len + i];
            if (src < len) gx[c * len + src] += self.grad[c * out_len + i];
          }
        }
      });
}

template <typename Real>
T<Real> Dropout(const T<Real>& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  std::vector<Real> mask(x.size());
  std::vector<Real> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform(rng) >= rate ? keep_scale : Real(0);
    out[i] = in[i] * mask[i];
  }
  return MakeResult<Real>("dropout", x.shape(), std::move(out), {x.node()},
                          [mask = std::move(mask)](Node<Real>& self) {
                            Real* gx = InputGrad(self, 0);
                            if (!gx) return;
                            for (std::size_t i = 0; i < mask.size(); ++i)
                              gx[i] += self.grad[i] * mask[i];
                          });
}

#define MSMATCH_INSTANTIATE_OPS(Real)                                          \
  template T<Real> MatMul(const T<Real>&, const T<Real>&);                     \
  template T<Real> Transpose(const T<Real>&);                                  \
  template T<Real> Add(const T<Real>&, const T<Real>&);                        \
  template T<Real> Sub(const T<Real>&, const T<Real>&);                        \
  template T<Real> Mul(const T<Real>&, const T<Real>&);                        \
  template T<Real> Scale(const T<Real>&, Real);                                \
  template T<Real> AddRowBias(const T<Real>&, const T<Real>&);                 \
  template T<Real> Relu(const T<Real>&);                                       \
  template T<Real> Sigmoid(const T<Real>&);                                    \
  template T<Real> ClampedLog(const T<Real>&, Real);                           \
  template T<Real> Softmax(const T<Real>&, std::size_t);                       \
  template T<Real> LogSoftmax(const T<Real>&, std::size_t);                    \
  template T<Real> Sum(const T<Real>&);                                        \
  template T<Real> SumSquares(const T<Real>&);                                 \
  template T<Real> ReduceMean(const T<Real>&, std::size_t);                    \
  template T<Real> ReduceMax(const T<Real>&, std::size_t);                     \
  template T<Real> Concat(std::span<const T<Real>>, std::size_t);              \
  template T<Real> Slice(const T<Real>&, std::size_t, std::size_t,             \
                         std::size_t);                                         \
  template T<Real> Reshape(const T<Real>&, Shape);                             \
  template T<Real> GatherRows(const T<Real>&, std::span<const std::int32_t>);  \
  template T<Real> PairwiseAdd(const T<Real>&, const T<Real>&);                \
  template T<Real> Conv1d(const T<Real>&, const T<Real>&, const T<Real>&);     \
  template T<Real> BatchNorm1d(const T<Real>&, const T<Real>&, const T<Real>&, \
                               BatchNormState<Real>&, Mode);                   \
  template T<Real> MaxPool1d(const T<Real>&);                                  \
  template T<Real> Dropout(const T<Real>&, double, Mode, Rng&);

MSMATCH_INSTANTIATE_OPS(float)
MSMATCH_INSTANTIATE_OPS(double)

#undef MSMATCH_INSTANTIATE_OPS

}  // namespace msm::nn
