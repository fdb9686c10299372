/*
 * Copyright 2026 The p3d Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "p3d/layers.hpp"

namespace p3d {
namespace {

using testing::random_tensor;

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  auto x = random_tensor(Shape5(4, 3, 3, 5, 5), 1, -2.0, 7.0);
  std::vector<double> gamma(3, 1.0), beta(3, 0.0);
  auto state = BnState<double>::unit(3);
  auto y = batch_norm<double>(x, gamma, beta, BnMode::kTrain, state, {});
  for (std::size_t c = 0; c < 3; ++c) {
    auto [mean, var] = testing::channel_moments(y, c);
    EXPECT_LT(std::abs(mean), 1e-5);
    EXPECT_LT(std::abs(var - 1.0), 1e-4);
  }
  auto want = testing::naive_batch_norm_train(x, gamma, beta, 1e-5);
  EXPECT_LT(testing::max_abs_between(y, want), 1e-12);
}

TEST(BatchNorm, ScaleAndShift) {
  auto raw = random_tensor(Shape5(8, 2, 2, 6, 6), 2);
  std::vector<double> one(2, 1.0), zero(2, 0.0);
  auto state = BnState<double>::unit(2);
  auto normalized = batch_norm<double>(raw, one, zero, BnMode::kTrain, state, {});
  std::vector<double> gamma(2, 2.0), beta(2, 3.0);
  auto y = batch_norm<double>(normalized, gamma, beta, BnMode::kTrain, state, {});
  for (std::size_t c = 0; c < 2; ++c) {
    auto [mean, var] = testing::channel_moments(y, c);
    EXPECT_NEAR(mean, 3.0, 1e-3);
    EXPECT_NEAR(std::sqrt(var), 2.0, 1e-3);
  }
}

TEST(BatchNorm, InferenceWithUnitStatsIsNearIdentity) {
  auto x = testing::random_tensor_f(Shape5(2, 3, 2, 4, 4), 3);
  std::vector<float> gamma(3, 1.0f), beta(3, 0.0f);
  auto state = BnState<float>::unit(3);
  auto y = batch_norm<float>(x, gamma, beta, BnMode::kInference, state, {});
  const double shrink = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(y[i], x[i] * shrink, 1e-7);
    EXPECT_LE(std::abs(y[i] - x[i]), 5e-6 * std::abs(x[i]) + 1e-7);
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  auto x = random_tensor(Shape5(4, 1, 2, 3, 3), 4, 1.0, 3.0);
  std::vector<double> gamma{1.0}, beta{0.0};
  auto state = BnState<double>::unit(1);
  BnConfig cfg;
  batch_norm<double>(x, gamma, beta, BnMode::kTrain, state, cfg);
  auto [mean, var] = testing::channel_moments(x, 0);
  const double m = static_cast<double>(x.size());
  EXPECT_NEAR(state.running_mean[0], 0.1 * mean, 1e-12);
  EXPECT_NEAR(state.running_var[0], 0.9 + 0.1 * var * m / (m - 1.0), 1e-12);

  auto frozen = BnState<double>::unit(1);
  batch_norm<double>(x, gamma, beta, BnMode::kTrain, frozen, cfg, nullptr, false);
  EXPECT_EQ(frozen.running_mean[0], 0.0);
}

TEST(BatchNorm, RejectsNonPositiveEps) {
  auto x = random_tensor(Shape5(1, 1, 1, 2, 2), 5);
  std::vector<double> g{1.0}, b{0.0};
  auto state = BnState<double>::unit(1);
  BnConfig cfg;
  cfg.eps = 0.0;
  EXPECT_THROW(batch_norm<double>(x, g, b, BnMode::kTrain, state, cfg), SpecError);
}

TEST(Pooling, GlobalAverageOfConstant) {
  auto x = ClipTensor::constant(Shape5(2, 5, 3, 4, 4), 5.0f);
  auto y = global_avg_pool(x);
  EXPECT_EQ(y.shape(), Shape5(2, 5, 1, 1, 1));
  for (float v : y.values()) EXPECT_EQ(v, 5.0f);
}

TEST(Pooling, MaxPoolTwoByTwo) {
  ClipTensor x(Shape5(1, 1, 1, 2, 2), std::vector<float>{1, 2, 3, 4});
  auto r = max_pool_spatial(x, PoolSpec{2, 2, 0});
  ASSERT_EQ(r.y.size(), 1u);
  EXPECT_EQ(r.y[0], 4.0f);
  EXPECT_EQ(r.argmax[0], 3u);
  ClipTensor dy(r.y.shape(), std::vector<float>{2.5f});
  auto dx = max_pool_spatial_backward<float>(x.shape(), r.argmax, dy);
  EXPECT_EQ(dx.storage(), (std::vector<float>{0, 0, 0, 2.5f}));
}

TEST(Pooling, PaddedTapsNeverWin) {
  auto x = ClipTensor::constant(Shape5(1, 1, 2, 4, 4), -3.0f);
  auto r = max_pool_spatial(x, PoolSpec{3, 2, 1});
  EXPECT_EQ(r.y.shape(), max_pool_output_shape(x.shape(), PoolSpec{3, 2, 1}));
  EXPECT_EQ(r.y.shape(), Shape5(1, 1, 2, 2, 2));
  for (float v : r.y.values()) EXPECT_EQ(v, -3.0f);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  for (int k : {2, 5, 101}) {
    ClipTensor logits(Shape5(3, k, 1, 1, 1), 0.25f);
    std::vector<int> labels{0, k - 1, k / 2};
    auto r = softmax_cross_entropy(logits, labels);
    EXPECT_NEAR(r.loss, std::log(static_cast<double>(k)), 1e-6);
  }
}

TEST(SoftmaxCrossEntropy, SaturatedLogitsStayFinite) {
  ClipTensor logits(Shape5(1, 2, 1, 1, 1), std::vector<float>{1000.0f, -1000.0f});
  std::vector<int> labels{0};
  auto r = softmax_cross_entropy(logits, labels);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_EQ(r.predictions[0], 0);
  std::vector<int> bad{2};
  EXPECT_THROW(softmax_cross_entropy(logits, bad), DataError);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  auto logits = random_tensor(Shape5(3, 4, 1, 1, 1), 6, -3.0, 3.0);
  std::vector<int> labels{1, 3, 0};
  auto r = softmax_cross_entropy(logits, labels);
  auto num = testing::numeric_gradient(logits.storage(), [&](const std::vector<double>& v) {
    return softmax_cross_entropy(Tensor<double>(logits.shape(), v), labels).loss;
  });
  for (std::size_t i = 0; i < num.size(); ++i) {
    double a = r.dlogits[i];
    EXPECT_LT(std::abs(a - num[i]) / std::max({std::abs(a), std::abs(num[i]), 1e-8}), 1e-6);
  }
}

TEST(FullyConnected, MatchesHandComputation) {
  ClipTensor x(Shape5(2, 3, 1, 1, 1), std::vector<float>{1, 2, 3, -1, 0, 1});
  ClipTensor w(Shape5(3, 2, 1, 1, 1), std::vector<float>{1, 0, 0, 1, 1, 1});
  std::vector<float> b{0.5f, -0.5f};
  auto y = fully_connected<float>(x, w, b);
  EXPECT_EQ(y.shape(), Shape5(2, 2, 1, 1, 1));
  EXPECT_EQ(y.storage(), (std::vector<float>{4.5f, 4.5f, 0.5f, 0.5f}));
}

TEST(Dropout, InvertedScalingAndDeterminism) {
  auto x = ClipTensor::constant(Shape5(1, 4000, 1, 1, 1), 1.0f);
  auto a = dropout(x, 0.75, 9);
  auto b = dropout(x, 0.75, 9);
  EXPECT_EQ(a.y.storage(), b.y.storage());
  std::size_t kept = 0;
  for (float v : a.y.values()) {
    EXPECT_TRUE(v == 0.0f || v == 4.0f);
    kept += v != 0.0f;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 4000.0, 0.25, 0.03);
  auto none = dropout(x, 0.0, 9);
  EXPECT_EQ(none.y.storage(), x.storage());
}

TEST(ConvLayer, DispatchesEveryGeometryLikeTheReference) {
  const KernelSpec specs[] = {
      KernelSpec::same(1, 3, 3, 4, 1, 2),
      KernelSpec::same(3, 1, 3, 4),
      KernelSpec::same(3, 1, 3, 4, 2, 2),
      KernelSpec::same(3, 3, 3, 4),
  };
  int i = 0;
  for (const auto& spec : specs) {
    ConvLayer<float> layer("conv", spec);
    layer.weight() = testing::random_tensor_f(spec.weight_shape(), 40 + i);
    auto x = testing::random_tensor_f(Shape5(2, 3, 4, 7, 7), 50 + i);
    EXPECT_LT(max_abs_diff(layer.forward(x, false), conv3d_ref(x, layer.weight(), spec)), 1e-6)
        << i;
    ++i;
  }
}

}  // namespace
}  // namespace p3d
