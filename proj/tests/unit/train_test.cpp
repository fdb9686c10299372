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
#include <limits>
#include <vector>

#include "p3d/checkpoint.hpp"
#include "p3d/train.hpp"

namespace p3d {
namespace {

ArchSpec tiny(BlockPolicy p, int classes = 2) {
  auto s = ArchSpec::reduced(50, p, classes);
  s.stem_channels = 4;
  s.mid_channels = {2, 4, 4, 8};
  s.input = {8, 16, 16};
  return s;
}

const MotionGeometry kSmall{3, 8, 16, 16};

TEST(LearningRate, StepSchedule) {
  TrainConfig cfg;
  EXPECT_EQ(learning_rate_at(cfg, 0), 0.001);
  EXPECT_EQ(learning_rate_at(cfg, 2999), 0.001);
  EXPECT_EQ(learning_rate_at(cfg, 3000), 0.0001);
  EXPECT_EQ(learning_rate_at(cfg, 5999), 0.0001);
  EXPECT_EQ(learning_rate_at(cfg, 6000), 0.00001);
  cfg.lr = 0.1;
  cfg.lr_step = 10;
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 25), 0.001);
}

TEST(TrainConfig, Validation) {
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = ok;
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), SpecError);
  bad = ok;
  bad.lr_step = 0;
  EXPECT_THROW(bad.validate(), SpecError);
  bad = ok;
  bad.momentum = 1.0;
  EXPECT_THROW(bad.validate(), SpecError);
  bad = ok;
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), SpecError);
  bad = ok;
  bad.dropout_rate = 1.0;
  EXPECT_THROW(bad.validate(), SpecError);
}

TEST(Sgd, ZeroGradientLeavesWeightsUnchanged) {
  std::vector<float> w{0.5f, -1.0f, 2.0f}, g(3, 0.0f);
  std::vector<ParamView<float>> views{{"w", ParamRole::kConvWeight, {3}, w, g}};
  SgdOptimizer sgd(views, 0.9, 0.0);
  for (int i = 0; i < 5; ++i) sgd.step(0.1);
  EXPECT_EQ(w, (std::vector<float>{0.5f, -1.0f, 2.0f}));
}

TEST(Sgd, MomentumAndWeightDecayFollowTheUpdateRule) {
  std::vector<float> w{1.0f, -2.0f}, g{0.5f, 0.25f};
  std::vector<float> b{3.0f}, gb{1.0f};
  std::vector<ParamView<float>> views{{"w", ParamRole::kConvWeight, {2}, w, g},
                                      {"b", ParamRole::kBnShift, {1}, b, gb}};
  const double mu = 0.9, wd = 0.01, lr = 0.1;
  SgdOptimizer sgd(views, mu, wd);
  double rw[2] = {1.0, -2.0}, vw[2] = {0, 0}, rb = 3.0, vb = 0.0;
  for (int step = 0; step < 3; ++step) {
    sgd.step(lr);
    for (int i = 0; i < 2; ++i) {
      vw[i] = mu * vw[i] - lr * (g[i] + wd * rw[i]);
      rw[i] += vw[i];
      EXPECT_NEAR(w[i], rw[i], 1e-6);
    }
    vb = mu * vb - lr * gb[0];
    rb += vb;
    EXPECT_NEAR(b[0], rb, 1e-6);
  }
}

TEST(Train, LogIsBitIdenticalForTheSameSeed) {
  auto data = make_motion_dataset(2, kSmall, 3);
  TrainConfig cfg;
  cfg.batch = 3;
  cfg.iters = 6;
  cfg.lr = 0.01;
  cfg.seed = 11;
  cfg.dropout_rate = 0.3;
  auto run = [&] {
    auto net = build_network<float>(tiny(BlockPolicy::kMixed), {5, false});
    auto log = train(net, data, cfg);
    return std::make_pair(log.to_text(), payload_hash(to_checkpoint(net)));
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  int lines = 0;
  for (char c : a.first) lines += c == '\n';
  EXPECT_EQ(lines, 6);
}

TEST(Train, RecordsCarryScheduleAndStopEarly) {
  auto data = make_motion_dataset(1, kSmall, 4);
  TrainConfig cfg;
  cfg.batch = 2;
  cfg.iters = 5;
  cfg.lr_step = 2;
  std::vector<TrainRecord> seen;
  auto net = build_network<float>(tiny(BlockPolicy::kAllA), {6, false});
  auto log = train(net, data, cfg, [&](const TrainRecord& r) { seen.push_back(r); });
  ASSERT_EQ(log.records.size(), 5u);
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_EQ(log.records[1].lr, 0.001);
  EXPECT_EQ(log.records[2].lr, 0.0001);
  EXPECT_EQ(log.records[4].lr, 0.00001);

  cfg.stop_at_accuracy = 0.0;
  auto stopped = train(net, data, cfg);
  EXPECT_EQ(stopped.records.size(), 1u);
}

TEST(Train, NonFiniteLossAborts) {
  auto data = make_motion_dataset(1, kSmall, 5);
  TrainConfig cfg;
  cfg.batch = 2;
  cfg.iters = 3;
  auto net = build_network<float>(tiny(BlockPolicy::kAllA), {7, false});
  net.classifier().bias()[1] = std::numeric_limits<float>::infinity();
  net.classifier().bias()[0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(train(net, data, cfg), NumericalError);
}

TEST(Train, HeadMustMatchLabels) {
  auto data = make_motion_dataset(1, kSmall, 6);
  auto net = build_network<float>(tiny(BlockPolicy::kAllA, 1), {8, false});
  TrainConfig cfg;
  cfg.iters = 1;
  EXPECT_THROW(train(net, data, cfg), ShapeError);
}

TEST(Train, FrozenBnKeepsStatisticsExceptStem) {
  auto data = make_motion_dataset(2, kSmall, 7);
  auto net = build_network<float>(tiny(BlockPolicy::kAllA), {9, false});
  auto before = net.blocks()[3].reduce_bn().state().running_mean;
  auto gamma_before = net.blocks()[3].reduce_bn().gamma();
  auto stem_before = net.stem_bn().state().running_mean;
  TrainConfig cfg;
  cfg.batch = 2;
  cfg.iters = 3;
  cfg.lr = 0.05;
  cfg.freeze_bn = true;
  train(net, data, cfg);
  EXPECT_EQ(net.blocks()[3].reduce_bn().state().running_mean, before);
  EXPECT_EQ(net.blocks()[3].reduce_bn().gamma(), gamma_before);
  EXPECT_NE(net.stem_bn().state().running_mean, stem_before);
}

TEST(Train, EvaluateRestoresTrainMode) {
  auto data = make_motion_dataset(2, kSmall, 8);
  auto net = build_network<float>(tiny(BlockPolicy::kAllA), {10, false});
  double acc = evaluate(net, data, 3);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_EQ(net.stem_bn().mode(), BnMode::kTrain);
}

}  // namespace
}  // namespace p3d
