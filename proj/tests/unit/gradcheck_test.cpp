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

#include <algorithm>
#include <memory>
#include <random>
#include <vector>

#include "p3d/gradcheck.hpp"

namespace p3d {
namespace {

class CatalogOp : public ::testing::TestWithParam<std::string> {};

TEST_P(CatalogOp, PassesAtSeveralSeeds) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto report = check_named_op(GetParam(), seed);
    EXPECT_FALSE(report.kink_limited) << "seed " << seed;
    EXPECT_LT(report.max_rel_error, 1e-5) << "seed " << seed;
    EXPECT_FALSE(report.worst_per_probe.empty());
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, CatalogOp, ::testing::ValuesIn(gradcheck_op_names()),
                         [](const auto& info) { return info.param; });

TEST(GradCheck, CatalogCoversPrimitivesAndBlocks) {
  const auto& names = gradcheck_op_names();
  for (const char* want : {"conv3d", "conv_spatial", "conv_temporal", "conv_pointwise",
                           "batch_norm", "relu", "max_pool", "global_avg_pool",
                           "fully_connected", "softmax_cross_entropy", "block_2d", "block_a",
                           "block_b", "block_c", "network"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
  }
  EXPECT_THROW(make_gradcheck_op("no_such_op", 1), SpecError);
}

struct SquareState {
  std::vector<double> x;
};

DiffOp square_op(bool correct) {
  auto st = std::make_shared<SquareState>();
  st->x = {0.5, -1.5, 2.0, 0.25};
  DiffOp op;
  op.name = "square";
  op.probes = {GradProbe{"x", st->x}};
  op.forward = [st] {
    Tensor<double> y(Shape5(1, 1, 1, 1, 4));
    for (std::size_t i = 0; i < 4; ++i) y[i] = st->x[i] * st->x[i];
    return y;
  };
  op.backward = [st, correct](const Tensor<double>& dy) {
    std::vector<double> g(4);
    for (std::size_t i = 0; i < 4; ++i) g[i] = dy[i] * (correct ? 2.0 : 1.9) * st->x[i];
    return std::vector<std::vector<double>>{g};
  };
  op.state = st;
  return op;
}

TEST(GradCheck, DetectsWrongGradient) {
  auto good = square_op(true);
  EXPECT_LT(grad_check(good, 4).max_rel_error, 1e-7);
  auto bad = square_op(false);
  auto report = grad_check(bad, 4);
  EXPECT_GT(report.max_rel_error, 1e-2);
  EXPECT_FALSE(report.kink_limited);
}

TEST(GradCheck, ReluAwayFromZero) {
  auto st = std::make_shared<SquareState>();
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  for (int i = 0; i < 32; ++i) st->x.push_back(i % 2 ? mag(gen) : -mag(gen));
  DiffOp op;
  op.name = "relu";
  op.probes = {GradProbe{"x", st->x}};
  op.forward = [st] {
    Tensor<double> x(Shape5(1, 1, 1, 1, 32), st->x);
    return relu(x);
  };
  op.backward = [st](const Tensor<double>& dy) {
    Tensor<double> x(Shape5(1, 1, 1, 1, 32), st->x);
    return std::vector<std::vector<double>>{relu_backward(x, dy).storage()};
  };
  op.state = st;
  auto report = grad_check(op, 5);
  EXPECT_EQ(report.redrawn, 0);
  EXPECT_LT(report.max_rel_error, 1e-7);
}

}  // namespace
}  // namespace p3d
