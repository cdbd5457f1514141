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

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "msmatch/adam.h"
#include "msmatch/error.h"
#include "msmatch/gradcheck.h"
#include "msmatch/ops.h"
#include "msmatch/tensor.h"

namespace msm::nn {
namespace {

Tensor RandomTensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                    double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

std::vector<double> Values(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

TEST(TensorTest, RejectsZeroExtentAndCountMismatch) {
  EXPECT_THROW(Tensor({0, 3}, {}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(TensorTest, ItemRequiresOneElement) {
  EXPECT_DOUBLE_EQ(Tensor::Scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor({2}, {1, 2}).item(), ContractError);
}

TEST(TapeTest, BackwardOfNonScalarIsContractError) {
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope<double> scope(tape);
    y = Scale(x, 2.0);
  }
  EXPECT_THROW(tape.Backward(y), ContractError);
}

TEST(TapeTest, NoGradScopeRecordsNothing) {
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> off;
    Tensor y = Sum(Mul(x, x));
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(TapeTest, GradientsAccumulateAcrossUses) {
  Tensor x({1}, {3.0}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope<double> scope(tape);
    y = Sum(Add(Mul(x, x), Scale(x, 2.0)));
  }
  tape.Backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 3.0 + 2.0);
}

TEST(StrictModeTest, NonFiniteForwardThrows) {
  StrictModeScope strict;
  Tensor x({1}, {0.0});
  EXPECT_THROW(ClampedLog(x, 0.0), NumericError);
}

TEST(MatMulTest, HandExample) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  EXPECT_EQ(Values(MatMul(a, b)), (std::vector<double>{19, 22, 43, 50}));
}

TEST(MatMulTest, InnerDimensionMismatch) {
  EXPECT_THROW(MatMul(Tensor::Zeros({2, 3}), Tensor::Zeros({2, 3})),
               DimensionError);
}

TEST(MatMulTest, MatchesTripleLoop) {
  const Tensor a = RandomTensor({4, 5}, 1);
  const Tensor b = RandomTensor({5, 3}, 2);
  const Tensor c = MatMul(a, b);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double want = 0.0;
      for (std::size_t p = 0; p < 5; ++p) want += a.at(i, p) * b.at(p, j);
      EXPECT_NEAR(c.at(i, j), want, 1e-14);
    }
  }
}

TEST(ActivationTest, SigmoidValues) {
  const Tensor s = Sigmoid(Tensor({4}, {0.0, std::log(3.0), 800.0, -800.0}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
  EXPECT_EQ(s[2], 1.0);
  EXPECT_GE(s[3], 0.0);
  EXPECT_TRUE(std::isfinite(s[3]));
}

TEST(ActivationTest, ReluClampsNegatives) {
  EXPECT_EQ(Values(Relu(Tensor({3}, {-1.0, 0.0, 2.0}))),
            (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(SoftmaxTest, ConstantInputIsUniform) {
  for (double c : {-50.0, 0.0, 3.0, 1e4}) {
    const Tensor p = Softmax(Tensor({3}, {c, c, c}), 0);
    for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
}

TEST(SoftmaxTest, MatchesDirectFormula) {
  const Tensor p = Softmax(Tensor({3}, {1, 2, 3}), 0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], std::exp(i + 1.0) / z, 1e-12);
}

TEST(SoftmaxTest, RowsSumToOneAndShiftInvariant) {
  const Tensor x = RandomTensor({5, 7}, 3, -20, 20);
  std::vector<double> shifted = Values(x);
  for (double& v : shifted) v += 123.25;
  const Tensor p = Softmax(x, 1);
  const Tensor q = Softmax(Tensor(x.shape(), shifted), 1);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      EXPECT_GE(p.at(r, c), 0.0);
      EXPECT_NEAR(p.at(r, c), q.at(r, c), 1e-12);
      total += p.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, LogSoftmaxAgreesWithLogOfSoftmax) {
  const Tensor x = RandomTensor({3, 4}, 4, -5, 5);
  const Tensor a = LogSoftmax(x, 0);
  const Tensor b = Softmax(x, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(a[i], std::log(b[i]), 1e-12);
  }
}

TEST(ReduceTest, MeanMaxConcatExamples) {
  EXPECT_DOUBLE_EQ(ReduceMean(Tensor({1, 3}, {2, 4, 6}), 1)[0], 4.0);
  const Tensor single({3, 1}, {5, -1, 2});
  EXPECT_EQ(Values(ReduceMax(single, 1)), Values(single));
  const Tensor parts[] = {Tensor({2}, {1, 2}), Tensor({1}, {3})};
  EXPECT_EQ(Values(Concat<double>(parts, 0)), (std::vector<double>{1, 2, 3}));
}

TEST(ReduceTest, MaxTieSendsGradientToFirstIndex) {
  Tensor x({1, 3}, {2.0, 5.0, 5.0}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope<double> scope(tape);
    y = Sum(ReduceMax(x, 1));
  }
  tape.Backward(y);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()),
            (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(ReduceTest, ConcatRejectsMismatchedExtents) {
  const Tensor parts[] = {Tensor::Zeros({2, 3}), Tensor::Zeros({3, 2})};
  EXPECT_THROW(Concat<double>(parts, 0), DimensionError);
}

TEST(PairwiseAddTest, BroadcastsRowsAgainstRows) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({3, 2}, {10, 20, 30, 40, 50, 60});
  const Tensor c = PairwiseAdd(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 2}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(c[(i * 3 + j) * 2 + k], a.at(i, k) + b.at(j, k));
      }
    }
  }
}

// Direct evaluation of the kernel-3 cross-correlation with zero padding.
std::vector<double> ConvOracle(const Tensor& x, const Tensor& w,
                               const Tensor& b) {
  const std::size_t cin = x.dim(0), len = x.dim(1), cout = w.dim(0);
  std::vector<double> out(cout * len);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < cin; ++c) {
        for (int k = 0; k < 3; ++k) {
          const long pos = static_cast<long>(t) + k - 1;
          if (pos < 0 || pos >= static_cast<long>(len)) continue;
          acc += w[(o * cin + c) * 3 + k] * x[c * len + pos];
        }
      }
      out[o * len + t] = acc;
    }
  }
  return out;
}

TEST(Conv1dTest, MatchesDirectEvaluationAndKeepsLength) {
  for (std::size_t len : {1, 2, 5, 9}) {
    const Tensor x = RandomTensor({3, len}, 10 + len);
    const Tensor w = RandomTensor({4, 3, 3}, 20 + len);
    const Tensor b = RandomTensor({4}, 30 + len);
    const Tensor y = Conv1d(x, w, b);
    ASSERT_EQ(y.shape(), (Shape{4, len}));
    const std::vector<double> want = ConvOracle(x, w, b);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(y[i], want[i], 1e-13);
    }
  }
}

TEST(Conv1dTest, ChannelMismatchIsDimensionError) {
  EXPECT_THROW(Conv1d(Tensor::Zeros({2, 4}), Tensor::Zeros({3, 5, 3}),
                      Tensor::Zeros({3})),
               DimensionError);
}

TEST(MaxPoolTest, HandExample) {
  EXPECT_EQ(Values(MaxPool1d(Tensor({1, 5}, {1, 2, 3, 4, 5}))),
            (std::vector<double>{2, 4, 5}));
}

TEST(MaxPoolTest, ConstantInputStaysConstant) {
  const Tensor y = MaxPool1d(Tensor::Filled({2, 6}, 1.5));
  for (double v : y.data()) EXPECT_EQ(v, 1.5);
}

TEST(MaxPoolTest, OutputLengthIsCeilHalf) {
  for (std::size_t len = 1; len <= 12; ++len) {
    EXPECT_EQ(MaxPool1d(Tensor::Filled({1, len}, 1.0)).dim(1), (len + 1) / 2);
  }
}

TEST(BatchNormTest, ConstantChannelOutputsShift) {
  BatchNormState<double> state(2);
  const Tensor x({2, 4}, {3, 3, 3, 3, -1, -1, -1, -1});
  const Tensor gamma({2}, {2.0, 0.5});
  const Tensor beta({2}, {0.25, -0.75});
  const Tensor y = BatchNorm1d(x, gamma, beta, state, Mode::kTrain);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_NEAR(y.at(0, t), 0.25, 1e-12);
    EXPECT_NEAR(y.at(1, t), -0.75, 1e-12);
  }
}

TEST(BatchNormTest, StandardizesLargeBatch) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(3.0, 2.0);
  std::vector<double> v(20000);
  for (double& x : v) x = normal(rng);
  BatchNormState<double> state(1);
  const Tensor y = BatchNorm1d(Tensor({1, v.size()}, v), Tensor({1}, {1.0}),
                               Tensor({1}, {0.0}), state, Mode::kTrain);
  double mean = 0.0, var = 0.0;
  for (double x : y.data()) mean += x;
  mean /= y.size();
  for (double x : y.data()) var += (x - mean) * (x - mean);
  var /= y.size();
  EXPECT_NEAR(mean, 0.0, 1e-2);
  EXPECT_NEAR(var, 1.0, 1e-2);
}

TEST(BatchNormTest, EvalModeUsesRunningStatistics) {
  BatchNormState<double> state(1);
  const Tensor x({1, 3}, {1.0, 2.0, 3.0});
  const Tensor gamma({1}, {1.0});
  const Tensor beta({1}, {0.0});
  // Fresh statistics: mean 0, variance 1.
  const Tensor fresh = BatchNorm1d(x, gamma, beta, state, Mode::kEval);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(fresh[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-12);
  }
  BatchNorm1d(x, gamma, beta, state, Mode::kTrain);
  EXPECT_NEAR(state.running_mean[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(state.running_var[0], 0.9 + 0.1 * (2.0 / 3.0), 1e-15);
}

TEST(DropoutTest, IdentityCases) {
  Rng rng(1);
  const Tensor x = RandomTensor({10}, 6);
  EXPECT_EQ(Values(Dropout(x, 0.0, Mode::kTrain, rng)), Values(x));
  EXPECT_EQ(Values(Dropout(x, 0.7, Mode::kEval, rng)), Values(x));
}

TEST(DropoutTest, KeptFractionAndMean) {
  Rng rng(7);
  const Tensor x = Tensor::Filled({100000}, 1.0);
  const Tensor y = Dropout(x, 0.2, Mode::kTrain, rng);
  std::size_t kept = 0;
  double mean = 0.0;
  for (double v : y.data()) {
    kept += v != 0.0;
    mean += v;
  }
  mean /= y.size();
  EXPECT_NEAR(static_cast<double>(kept) / y.size(), 0.8, 0.01);
  EXPECT_NEAR(mean, 1.0, 0.02);
}

TEST(DropoutTest, RateOutsideRangeIsConfigError) {
  Rng rng(1);
  EXPECT_THROW(Dropout(Tensor::Zeros({2}), 1.0, Mode::kTrain, rng),
               ConfigError);
  EXPECT_THROW(Dropout(Tensor::Zeros({2}), -0.1, Mode::kTrain, rng),
               ConfigError);
}

TEST(DropoutTest, SameSeedSameMask) {
  const Tensor x = RandomTensor({50}, 8);
  Rng a(3), b(3);
  EXPECT_EQ(Values(Dropout(x, 0.5, Mode::kTrain, a)),
            Values(Dropout(x, 0.5, Mode::kTrain, b)));
}

TEST(GradCheckTest, SumOfSquares) {
  Tensor x({2}, {1.0, 2.0}, true);
  const Tensor inputs[] = {x};
  EXPECT_LE(GradCheck([&] { return SumSquares(x); }, inputs), 1e-8);
  Tape tape;
  Tensor y;
  {
    TapeScope<double> scope(tape);
    y = SumSquares(x);
  }
  tape.Backward(y);
  EXPECT_NEAR(x.grad()[0], 2.0, 1e-15);
  EXPECT_NEAR(x.grad()[1], 4.0, 1e-15);
}

TEST(GradCheckTest, ReluAwayFromKink) {
  Tensor x({4}, {0.5, -0.3, 1.2, -2.0}, true);
  const Tensor w({4}, {1.0, -2.0, 0.5, 3.0});
  const Tensor inputs[] = {x};
  EXPECT_LE(GradCheck([&] { return Sum(Mul(Relu(x), w)); }, inputs), 1e-7);
}

TEST(GradCheckTest, NonScalarIsContractError) {
  Tensor x({2}, {1.0, 2.0}, true);
  const Tensor inputs[] = {x};
  EXPECT_THROW(GradCheck([&] { return Scale(x, 2.0); }, inputs), ContractError);
}

TEST(GradCheckTest, RandomPointsAcrossOps) {
  const Tensor x = RandomTensor({3, 6}, 40);
  const Tensor w = RandomTensor({2, 3, 3}, 41);
  const Tensor b = RandomTensor({2}, 42);
  const Tensor gamma = RandomTensor({2}, 43, 0.5, 1.5);
  const Tensor beta = RandomTensor({2}, 44);
  const Tensor proj = RandomTensor({2, 3}, 45).Detach();
  const Tensor inputs[] = {x, w, b, gamma, beta};
  const double err = GradCheck(
      [&] {
        BatchNormState<double> state(2);
        Tensor h =
            BatchNorm1d(Conv1d(x, w, b), gamma, beta, state, Mode::kTrain);
        return Sum(Mul(MaxPool1d(Sigmoid(h)), proj));
      },
      inputs);
  EXPECT_LE(err, 1e-5);
}

TEST(GradCheckTest, DetectsInjectedFault) {
  const Tensor a = RandomTensor({2, 3}, 50);
  const Tensor b = RandomTensor({3, 2}, 51);
  const Tensor inputs[] = {a, b};
  auto f = [&] { return Sum(MatMul(a, b)); };
  SetBackwardFault("matmul");
  const double faulty = GradCheck(f, inputs);
  SetBackwardFault("");
  EXPECT_GT(faulty, 1e-2);
  EXPECT_LE(GradCheck(f, inputs), 1e-8);
}

TEST(Float32Test, MatMulAndSoftmaxAgreeWithDouble) {
  const Tensor a = RandomTensor({3, 4}, 60);
  const Tensor b = RandomTensor({4, 2}, 61);
  auto to32 = [](const Tensor& t) {
    return Tensor32(t.shape(),
                    std::vector<float>(t.data().begin(), t.data().end()));
  };
  const Tensor32 c = Softmax(MatMul(to32(a), to32(b)), 1);
  const Tensor d = Softmax(MatMul(a, b), 1);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(c[i], d[i], 1e-6);
}

TEST(AdamTest, ZeroGradientLeavesParameters) {
  std::vector<double> p = {1.0, -2.0}, g = {0.0, 0.0}, m(2), v(2);
  AdamStep(p, g, m, v, 1, 1e-3, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(AdamTest, SingleStepMatchesFormula) {
  std::vector<double> p = {0.5}, g = {1.0}, m(1), v(1);
  const double lr = 1e-4;
  AdamStep(p, g, m, v, 1, lr, {});
  const double m1 = 0.1, v1 = 0.001;
  const double m_hat = m1 / (1 - 0.9), v_hat = v1 / (1 - 0.999);
  EXPECT_NEAR(p[0], 0.5 - lr * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(AdamTest, SizeMismatchIsDimensionError) {
  std::vector<double> p = {1.0, 2.0}, g = {1.0}, m(2), v(2);
  EXPECT_THROW(AdamStep(p, g, m, v, 1, 1e-3, {}), DimensionError);
}

TEST(AdamTest, ScheduleDecaysByFiveEveryTenEpochs) {
  EXPECT_EQ(ScheduledLearningRate(0), 1e-4);
  EXPECT_EQ(ScheduledLearningRate(9), 1e-4);
  EXPECT_EQ(ScheduledLearningRate(10), 2e-5);
  EXPECT_EQ(ScheduledLearningRate(20), 4e-6);
  EXPECT_EQ(ScheduledLearningRate(29), 4e-6);
}

TEST(AdamTest, OptimizerMinimizesQuadratic) {
  Tensor x({2}, {3.0, -4.0}, true);
  Adam opt({x}, 0.1);
  for (int i = 0; i < 500; ++i) {
    opt.ZeroGrad();
    Tape tape;
    Tensor loss;
    {
      TapeScope<double> scope(tape);
      loss = SumSquares(x);
    }
    tape.Backward(loss);
    opt.Step();
  }
  EXPECT_NEAR(x[0], 0.0, 1e-2);
  EXPECT_NEAR(x[1], 0.0, 1e-2);
}

}  // namespace
}  // namespace msm::nn
