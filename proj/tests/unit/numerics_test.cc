// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grad_suite.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/adam.hpp"
#include "labtx/numerics/attention.hpp"
#include "labtx/numerics/init.hpp"
#include "labtx/numerics/ops.hpp"

namespace labtx {
namespace {

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Tensor, RejectsDataOfWrongSize) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<Real>(5)), DimensionError);
}

TEST(Tensor, CloneIsIndependentLeaf) {
  Tensor a({2}, std::vector<Real>{1, 2});
  a.set_requires_grad(true);
  Tensor b = a.clone();
  b.mutable_data()[0] = 9;
  EXPECT_EQ(a.data()[0], 1);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.is_leaf());
}

TEST(Tape, UnrecordedResultIsAConstant) {
  Tensor a({2}, std::vector<Real>{1, 2});
  a.set_requires_grad(true);
  Tape tape;
  Tensor y = ops::sum(ops::mul(a, a));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_TRUE(y.is_leaf());
  tape.backward(y);
  EXPECT_FALSE(a.has_grad());
}

TEST(Tape, BackwardNeedsAScalar) {
  Tape tape;
  EXPECT_THROW(tape.backward(Tensor({2})), ContractError);
}

TEST(Tape, NoGradGuardSuppressesRecording) {
  Tensor a({2}, std::vector<Real>{1, 2});
  a.set_requires_grad(true);
  Tape tape;
  Tape::Recording recording(tape);
  {
    NoGradGuard no_grad;
    ops::sum(a);
  }
  EXPECT_EQ(tape.size(), 0u);
  ops::sum(a);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  // y = sum(a * a + a): dy/da = 2a + 1.
  Tensor a({3}, std::vector<Real>{1, -2, 0.5});
  a.set_requires_grad(true);
  Tape tape;
  Tensor y;
  {
    Tape::Recording recording(tape);
    y = ops::sum(ops::add(ops::mul(a, a), a));
  }
  tape.backward(y);
  EXPECT_EQ(values(Tensor({3}, std::vector<Real>(a.grad().begin(), a.grad().end()))),
            (std::vector<Real>{3, -3, 2}));
}

TEST(Tape, NonFiniteLossRaises) {
  Tensor a({1}, std::vector<Real>{-1});
  a.set_requires_grad(true);
  Tape tape;
  Tensor y;
  {
    Tape::Recording recording(tape);
    y = ops::nll_from_probs(ops::reshape(ops::relu(a), {1, 1}), std::vector<std::size_t>{0});
  }
  EXPECT_THROW(tape.backward(y), NumericError);
}

TEST(Ops, MatmulHandExample) {
  Tensor a({2, 2}, std::vector<Real>{1, 2, 3, 4});
  Tensor b({2, 2}, std::vector<Real>{5, 6, 7, 8});
  EXPECT_EQ(values(ops::matmul(a, b)), (std::vector<Real>{19, 22, 43, 50}));
  EXPECT_THROW(ops::matmul(a, Tensor({3, 2})), DimensionError);
}

TEST(Ops, LinearBroadcastsBiasOverRows) {
  Tensor x({1, 2, 2}, std::vector<Real>{1, 0, 0, 1});
  Tensor w({2, 1}, std::vector<Real>{2, 3});
  Tensor b({1}, std::vector<Real>{10});
  EXPECT_EQ(values(ops::linear(x, w, b)), (std::vector<Real>{12, 13}));
  EXPECT_EQ(values(ops::linear(x, w, Tensor())), (std::vector<Real>{2, 3}));
}

TEST(Ops, SoftmaxKnownValues) {
  Tensor x({1, 2}, std::vector<Real>{0, static_cast<Real>(std::log(3.0))});
  const auto p = values(ops::softmax(x));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
  const auto big = values(ops::softmax(Tensor({1, 2}, std::vector<Real>{1000, 1000})));
  EXPECT_EQ(big, (std::vector<Real>{0.5, 0.5}));
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(3);
  const Tensor p = ops::softmax(testing::random_tensor({5, 7}, rng, 4.0));
  for (std::size_t r = 0; r < 5; ++r) {
    const auto row = p.data().subspan(r * 7, 7);
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), Real{0}), 1.0, 1e-12);
  }
}

TEST(Ops, LayerNormKnownValues) {
  Tensor x({1, 3}, std::vector<Real>{1, 2, 3});
  const auto y = values(ops::layer_norm(x, Tensor({3}, Real{1}), Tensor({3}, Real{0})));
  const double sd = std::sqrt(2.0 / 3.0 + 1e-5);
  EXPECT_NEAR(y[0], -1 / sd, 1e-12);
  EXPECT_NEAR(y[1], 0, 1e-12);
  EXPECT_NEAR(y[2], 1 / sd, 1e-12);
}

TEST(Ops, EmbeddingPadRowsAreZeroAndIdsAreChecked) {
  Tensor table({3, 2}, std::vector<Real>{7, 7, 1, 2, 3, 4});
  const std::vector<Token> ids{2, 0};
  EXPECT_EQ(values(ops::embedding(table, ids, {2}, 0)), (std::vector<Real>{3, 4, 0, 0}));
  const std::vector<Token> bad{3};
  EXPECT_THROW(ops::embedding(table, bad, {1}, 0), VocabError);
}

TEST(Ops, MaskedMeanPoolSkipsPadding) {
  Tensor x({2, 2, 1}, std::vector<Real>{1, 3, 5, 9});
  const std::vector<std::uint8_t> pad{0, 0, 1, 1};
  EXPECT_EQ(values(ops::masked_mean_pool(x, pad)), (std::vector<Real>{2, 0}));
}

TEST(Ops, PoolOfIdenticalRowsIsTheRow) {
  Tensor x({1, 3, 2}, std::vector<Real>{0.25, -1, 0.25, -1, 0.25, -1});
  const std::vector<std::uint8_t> pad{0, 0, 0};
  EXPECT_EQ(values(ops::masked_mean_pool(x, pad)), (std::vector<Real>{0.25, -1}));
}

TEST(Ops, LossesKnownValues) {
  const Tensor uniform({2, 4}, Real{0.25});
  EXPECT_NEAR(ops::nll_from_probs(uniform, std::vector<std::size_t>{0, 3}).item(), std::log(4.0), 1e-15);
  EXPECT_THROW(ops::nll_from_probs(uniform, std::vector<std::size_t>{4, 0}), VocabError);
  EXPECT_NEAR(ops::mse(Tensor({2}, std::vector<Real>{1, 3}), std::vector<Real>{0, 1}).item(), 2.5, 1e-15);
  EXPECT_NEAR(ops::binary_cross_entropy(Tensor({2}, Real{0.5}), std::vector<Real>{0, 1}).item(), std::log(2.0),
              1e-15);
}

TEST(Ops, DropoutIsIdentityInEvalAndScalesInTraining) {
  Rng rng(1);
  const Tensor x({1000}, Real{1});
  EXPECT_EQ(values(ops::dropout(x, Real{0.4}, rng, false)), values(x));
  const auto y = values(ops::dropout(x, Real{0.4}, rng, true));
  std::size_t kept = 0;
  for (Real v : y) {
    if (v != 0) {
      EXPECT_NEAR(v, 1 / 0.6, 1e-12);
      ++kept;
    }
  }
  EXPECT_GT(kept, 500u);
  EXPECT_LT(kept, 700u);
}

TEST(Ops, ShapeMismatchesRaise) {
  EXPECT_THROW(ops::add(Tensor({2}), Tensor({3})), DimensionError);
  EXPECT_THROW(ops::concat_last(Tensor({2, 1}), Tensor({3, 1})), DimensionError);
  EXPECT_THROW(ops::reshape(Tensor({2, 3}), {4}), DimensionError);
}

TEST(Attention, PaddedKeysDoNotInfluenceRealRows) {
  Rng rng(5);
  Tensor q = testing::random_tensor({1, 3, 4}, rng), k = testing::random_tensor({1, 3, 4}, rng),
         v = testing::random_tensor({1, 3, 4}, rng);
  const std::vector<std::uint8_t> pad{0, 0, 1};
  const auto base = values(ops::scaled_dot_product_attention(q, k, v, pad, 2));
  for (std::size_t j = 8; j < 12; ++j) {
    k.mutable_data()[j] += 100;
    v.mutable_data()[j] -= 50;
  }
  const auto changed = values(ops::scaled_dot_product_attention(q, k, v, pad, 2));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(base[i], changed[i]);
  for (std::size_t i = 8; i < 12; ++i) EXPECT_EQ(changed[i], 0);
}

TEST(Attention, SingleKeyReturnsItsValue) {
  Tensor q({1, 1, 2}, std::vector<Real>{3, -1});
  Tensor k({1, 1, 2}, std::vector<Real>{0.5, 2});
  Tensor v({1, 1, 2}, std::vector<Real>{4, 5});
  const std::vector<std::uint8_t> pad{0};
  EXPECT_EQ(values(ops::scaled_dot_product_attention(q, k, v, pad, 1)), (std::vector<Real>{4, 5}));
}

TEST(Attention, UniformLogitsAverageTheValues) {
  Tensor q({1, 2, 1}, Real{0});
  Tensor k({1, 2, 1}, std::vector<Real>{1, -1});
  Tensor v({1, 2, 1}, std::vector<Real>{2, 6});
  const std::vector<std::uint8_t> pad{0, 0};
  EXPECT_EQ(values(ops::scaled_dot_product_attention(q, k, v, pad, 1)), (std::vector<Real>{4, 4}));
}

TEST(Adam, FirstStepMovesEachWeightByTheLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps).
  Tensor w({3}, std::vector<Real>{1, 1, 1});
  w.set_requires_grad(true);
  auto g = w.mutable_grad();
  g[0] = 2;
  g[1] = -0.5;
  g[2] = 0;
  Adam adam({w}, AdamOptions{0.1});
  adam.step();
  EXPECT_NEAR(w.data()[0], 0.9, 1e-8);
  EXPECT_NEAR(w.data()[1], 1.1, 1e-8);
  EXPECT_EQ(w.data()[2], 1);
}

TEST(Adam, SecondStepMatchesHandComputation) {
  Tensor w({1}, std::vector<Real>{0});
  w.set_requires_grad(true);
  Adam adam({w}, AdamOptions{0.01});
  w.mutable_grad()[0] = 1;
  adam.step();
  adam.zero_grad();
  w.mutable_grad()[0] = 3;
  adam.step();
  const double m = 0.9 * 0.1 + 0.1 * 3, v = 0.999 * 0.001 + 0.001 * 9;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double expected = -0.01 * 1 / (1 + 1e-8) - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(w.data()[0], expected, 1e-12);
}

TEST(Init, XavierBoundsAndDeterminism) {
  Rng a(9), b(9);
  const Tensor x = init::xavier_uniform(30, 20, a);
  EXPECT_EQ(values(x), values(init::xavier_uniform(30, 20, b)));
  const double bound = std::sqrt(6.0 / 50.0);
  for (Real v : x.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(Init, UniformIndexCoversRange) {
  Rng rng(2);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 500; ++i) ++seen[init::uniform_index(rng, 5)];
  for (int c : seen) EXPECT_GT(c, 50);
}

class GradientSuite : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(GradientSuite, MatchesCentralDifferences) {
  const testing::GradCase& c = GetParam();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto [loss, leaves] = c.make(seed);
    const auto result = testing::check_gradients(loss, leaves);
    EXPECT_LT(result.max_rel_error, 1e-4) << c.name << " seed " << seed << " worst " << result.worst;
    EXPECT_GT(result.checked, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientSuite, ::testing::ValuesIn(testing::gradient_cases()),
                         [](const auto& info) { return info.param.name; });

}  // namespace
}  // namespace labtx
