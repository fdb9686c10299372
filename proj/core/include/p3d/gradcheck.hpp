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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "p3d/tensor.hpp"

namespace p3d {

/// A perturbable tensor of a differentiable op (an input or a parameter).
struct GradProbe {
  std::string name;
  std::span<double> value;
};

/// Double-precision op under test. `backward(dy)` is called once, right after
/// a `forward()`, and returns one analytic gradient per probe, in probe order.
struct DiffOp {
  std::string name;
  std::vector<GradProbe> probes;
  std::function<Tensor<double>()> forward;
  std::function<std::vector<std::vector<double>>(const Tensor<double>& dy)> backward;
  std::shared_ptr<void> state;  ///< owns whatever the closures and probes reference
  double step = 1e-5;           ///< finite-difference step h
};

struct ProbeError {
  std::string probe;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int redrawn = 0;            ///< directions discarded for crossing a kink
  bool kink_limited = false;  ///< some probe ran out of redraws: the point sits on a kink
  int points = 1;             ///< sample points tried by check_named_op
  std::vector<ProbeError> worst_per_probe;
};

/// Central differences (f(x + h v) - f(x - h v)) / 2h on the scalar
/// L = <r, op(x)> for a random projection r, along `directions` random
/// directions v per probe. rel err = |a - n| / max(|a|, |n|, 1e-8).
///
/// Piecewise-linear layers (ReLU, max pool) have kinks; a step that crosses
/// one gives a meaningless difference quotient. Each direction is therefore
/// also differenced with h / 2, and a direction whose two estimates disagree
/// by more than `kink_tol` (relative) is redrawn, up to `max_redraws` times per
/// probe. A wrong analytic gradient still converges numerically, so it is not
/// masked by this. Uses op.step as h.
GradCheckReport grad_check(DiffOp& op, std::uint64_t seed, int directions = 3,
                           double kink_tol = 1e-6, int max_redraws = 20);

/// Names accepted by make_gradcheck_op, in catalog order.
const std::vector<std::string>& gradcheck_op_names();

/// Builds a reduced-shape instance of a named op: the layer primitives
/// (conv3d, conv_spatial, conv_temporal, conv_pointwise, batch_norm,
/// batch_norm_inference, relu, max_pool, global_avg_pool, fully_connected,
/// softmax_cross_entropy, dropout, add), every block kind with and without a
/// projection shortcut, and a whole miniature network.
/// Throws SpecError for an unknown name.
DiffOp make_gradcheck_op(const std::string& name, std::uint64_t seed);

/// Runs grad_check on make_gradcheck_op(name, seed). When the sample point
/// lies on a kink (every direction crosses it), the op is rebuilt at a
/// freshly seeded point, up to `max_points` points in total.
GradCheckReport check_named_op(const std::string& name, std::uint64_t seed, int max_points = 4);

}  // namespace p3d
