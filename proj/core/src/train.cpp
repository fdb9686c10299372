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
#include "p3d/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "p3d/error.hpp"
#include "p3d/rng.hpp"

namespace p3d {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw SpecError("learning rate must be positive");
  if (lr_step <= 0) throw SpecError("lr step must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw SpecError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw SpecError("weight decay must be non-negative");
  if (batch == 0) throw SpecError("batch size must be positive");
  if (iters < 0) throw SpecError("iteration count must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw SpecError("dropout rate must lie in [0, 1)");
}

double learning_rate_at(const TrainConfig& cfg, int iter) {
  return cfg.lr / std::pow(10.0, iter / cfg.lr_step);
}

std::string TrainLog::to_text() const {
  std::string out;
  char line[128];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%d %.6g %.9g %.6f\n", r.iter, r.lr, r.loss, r.accuracy);
    out += line;
  }
  return out;
}

SgdOptimizer::SgdOptimizer(std::vector<ParamView<float>> params, double momentum,
                           double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  for (auto& p : params) {
    if (!is_trainable(p.role) || p.grad.empty()) continue;
    velocity_.emplace_back(p.value.size(), 0.0f);
    params_.push_back(std::move(p));
  }
}

void SgdOptimizer::step(double lr) {
  const float mu = static_cast<float>(momentum_);
  const float rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamView<float>& p = params_[i];
    const bool decay = p.role == ParamRole::kConvWeight || p.role == ParamRole::kFcWeight;
    const float wd = decay ? static_cast<float>(weight_decay_) : 0.0f;
    float* v = velocity_[i].data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      v[j] = mu * v[j] - rate * (p.grad[j] + wd * p.value[j]);
      p.value[j] += v[j];
    }
  }
}

TrainLog train(Network<float>& net, const LabeledClips& data, const TrainConfig& cfg,
               const TrainHook& hook) {
  cfg.validate();
  if (data.size() == 0) throw DataError("training set is empty");
  if (data.num_classes() > net.spec().num_classes)
    throw ShapeError("network head has " + std::to_string(net.spec().num_classes) +
                     " classes but labels reach " + std::to_string(data.num_classes() - 1));

  net.set_bn_mode(BnMode::kTrain);
  net.freeze_bn_except_first(cfg.freeze_bn);
  net.set_dropout_rate(cfg.dropout_rate);
  net.set_dropout_seed(splitmix64(cfg.seed ^ 0xd1b54a32d192ed03ULL));
  SgdOptimizer sgd(net.params(), cfg.momentum, cfg.weight_decay);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  auto next_batch = [&] {
    std::vector<std::size_t> idx;
    const std::size_t want = std::min(cfg.batch, data.size());
    while (idx.size() < want) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    return idx;
  };

  TrainLog log;
  for (int it = 0; it < cfg.iters; ++it) {
    const std::vector<std::size_t> idx = next_batch();
    const std::vector<int> labels = data.batch_labels(idx);
    const Tensor<float> logits = net.forward(data.batch(idx), true);
    const LossResult<float> res = softmax_cross_entropy<float>(logits, labels);
    if (!std::isfinite(res.loss))
      throw NumericalError("training diverged at iteration " + std::to_string(it) +
                           " (loss is not finite)");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += res.predictions[i] == labels[i];

    TrainRecord rec{it, learning_rate_at(cfg, it), res.loss,
                    static_cast<double>(correct) / static_cast<double>(labels.size())};
    net.zero_grad();
    net.backward(res.dlogits);
    sgd.step(rec.lr);
    log.records.push_back(rec);
    if (hook) hook(rec);
    if (rec.accuracy >= cfg.stop_at_accuracy) break;
  }
  return log;
}

double evaluate(Network<float>& net, const LabeledClips& data, std::size_t batch) {
  if (data.size() == 0) throw DataError("evaluation set is empty");
  if (batch == 0) throw SpecError("batch size must be positive");
  net.set_bn_mode(BnMode::kInference);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) idx.push_back(i);
    const std::vector<int> labels = data.batch_labels(idx);
    const LossResult<float> res =
        softmax_cross_entropy<float>(net.forward(data.batch(idx), false), labels);
    for (std::size_t i = 0; i < labels.size(); ++i) correct += res.predictions[i] == labels[i];
  }
  net.set_bn_mode(BnMode::kTrain);
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace p3d
