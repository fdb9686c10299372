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
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "p3d/motion_dataset.hpp"
#include "p3d/network.hpp"

namespace p3d {

struct TrainConfig {
  double lr = 0.001;
  int lr_step = 3000;          ///< iterations between divisions of lr by 10
  double momentum = 0.9;
  double weight_decay = 1e-4;  ///< applied to conv and fc weights only
  std::size_t batch = 8;
  int iters = 100;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  bool freeze_bn = false;      ///< freeze every BN layer but the stem's
  /// Stop after the first iteration whose batch accuracy reaches this value
  /// (values above 1 never trigger).
  double stop_at_accuracy = 2.0;

  /// Throws SpecError unless lr > 0, lr_step > 0, batch > 0, iters >= 0 and
  /// momentum, dropout in [0, 1).
  void validate() const;
};

/// lr / 10^floor(iter / lr_step).
double learning_rate_at(const TrainConfig& cfg, int iter);

struct TrainRecord {
  int iter = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;  ///< on the batch, measured before the update
};

struct TrainLog {
  std::vector<TrainRecord> records;
  /// One "iter lr loss accuracy" line per record.
  std::string to_text() const;
};

/// Momentum SGD over a fixed parameter list:
///   v <- mu v - lr (g + wd w),  w <- w + v
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<ParamView<float>> params, double momentum, double weight_decay);
  void step(double lr);

 private:
  std::vector<ParamView<float>> params_;
  std::vector<std::vector<float>> velocity_;
  double momentum_;
  double weight_decay_;
};

using TrainHook = std::function<void(const TrainRecord&)>;

/// Trains in place with BN in batch-statistics mode. Batches walk a fresh
/// seeded permutation of the data each epoch. Throws ShapeError if the head
/// does not match the label range and NumericalError on a non-finite loss.
TrainLog train(Network<float>& net, const LabeledClips& data, const TrainConfig& cfg,
               const TrainHook& hook = {});

/// Accuracy over the whole set with BN in inference mode.
double evaluate(Network<float>& net, const LabeledClips& data, std::size_t batch = 8);

}  // namespace p3d
