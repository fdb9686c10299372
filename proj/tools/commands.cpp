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
#include "commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "p3d/bench.hpp"
#include "p3d/checkpoint.hpp"
#include "p3d/clip_io.hpp"
#include "p3d/error.hpp"
#include "p3d/features.hpp"
#include "p3d/gradcheck.hpp"
#include "p3d/motion_dataset.hpp"
#include "p3d/network.hpp"
#include "p3d/train.hpp"

namespace p3d::cli {

namespace {

std::vector<long> parse_ints(const std::string& text, std::size_t count, const char* what) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size() || v < 1)
      throw SpecError(std::string(what) + " must be " + std::to_string(count) +
                      " positive comma-separated integers, got '" + text + "'");
    out.push_back(v);
  }
  if (out.size() != count)
    throw SpecError(std::string(what) + " must have " + std::to_string(count) + " fields, got '" +
                    text + "'");
  return out;
}

double mib(std::size_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0); }

std::string block_sequence(Network<float>& net) {
  std::string out;
  for (const auto& b : net.blocks()) {
    if (!out.empty()) out += ' ';
    out += kind_name(b.spec().kind);
  }
  return out;
}

}  // namespace

ClipGeometry parse_geometry(const std::string& text) {
  const auto v = parse_ints(text, 3, "--input");
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

std::pair<std::size_t, std::size_t> parse_extent(const std::string& text) {
  const auto v = parse_ints(text, 2, "--resize");
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])};
}

int run_build(const BuildArgs& a, std::ostream& out) {
  const BlockPolicy policy = parse_policy(a.blocks);
  ArchSpec spec = a.reduced ? ArchSpec::reduced(a.depth, policy, a.classes)
                            : ArchSpec::standard(a.depth, policy, a.classes);
  if (!a.input.empty()) spec.input = parse_geometry(a.input);
  Network<float> net = build_network<float>(spec, InitRule{a.seed});
  save_checkpoint(net, a.out);
  const ParamTable t = count_parameters(net);
  out << "wrote " << a.out << ": depth " << spec.depth << ", blocks " << policy_name(policy) << ", "
      << net.blocks().size() << " residual units, " << t.total() << " parameters\n";
  return kExitOk;
}

int run_summary(const SummaryArgs& a, std::ostream& out) {
  std::optional<ClipGeometry> requested;
  if (!a.input.empty()) requested = parse_geometry(a.input);
  Network<float> net = load_network(a.ckpt);
  out << summarize(net, requested.value_or(net.spec().input));
  const ParamTable t = count_parameters(net);
  const std::size_t bytes = model_size_bytes(net, a.include_running_stats);
  char line[256];
  std::snprintf(line, sizeof line,
                "blocks (%zu): %s\nweights %zu  bn %zu  running stats %zu (not counted)\n"
                "model size %zu bytes = %.1f MiB (float32%s)\n",
                net.blocks().size(), block_sequence(net).c_str(), t.weights, t.bn, t.running_stats,
                bytes, mib(bytes), a.include_running_stats ? ", with running stats" : "");
  out << line;
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.list) {
    for (const auto& n : gradcheck_op_names()) out << n << '\n';
    return kExitOk;
  }
  if (!a.all && a.op.empty()) throw SpecError("give --op NAME or --all");
  const std::vector<std::string> names =
      a.all ? gradcheck_op_names() : std::vector<std::string>{a.op};
  int failures = 0;
  for (const auto& name : names) {
    const GradCheckReport r = check_named_op(name, a.seed);
    const bool ok = r.max_rel_error < a.tolerance;
    failures += !ok;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s probes %3zu  points %d  redrawn %3d  max rel err %.3e  %s\n",
                  name.c_str(), r.worst_per_probe.size(), r.points, r.redrawn, r.max_rel_error, ok ? "PASS" : "FAIL");
    out << line;
    if (a.verbose)
      for (const auto& p : r.worst_per_probe) {
        std::snprintf(line, sizeof line, "    %-36s analytic % .6e  numeric % .6e  rel %.2e\n",
                      p.probe.c_str(), p.analytic, p.numeric, p.rel_error);
        out << line;
      }
  }
  out << (failures == 0 ? "all gradients agree\n" : std::to_string(failures) + " op(s) failed\n");
  return failures == 0 ? kExitOk : kExitNumerical;
}

int run_inflate(const InflateArgs& a, std::ostream& out) {
  const Checkpoint src = read_checkpoint(a.from2d);
  ArchSpec spec;
  if (src.find(kArchTensorName)) {
    spec = decode_arch(src);
    if (spec.policy != BlockPolicy::kBasic2D)
      throw DataError(a.from2d + " holds a " + policy_name(spec.policy) + " network, not a 2D one");
  } else {
    const NamedTensor* fc = src.find("fc.weight");
    if (!fc || fc->dims.size() != 2) throw DataError(a.from2d + " has no 2D fc.weight tensor");
    spec = ArchSpec::standard(a.depth, BlockPolicy::kBasic2D, static_cast<int>(fc->dims[1]));
  }
  spec.policy = parse_policy(a.blocks);
  Network<float> net = build_network<float>(spec, InitRule{a.seed});
  inflate_from_2d(net, src, parse_temporal_init(a.temporal), a.seed);
  save_checkpoint(net, a.into);
  out << "wrote " << a.into << ": " << policy_name(spec.policy) << " blocks, temporal init "
      << a.temporal << ", " << temporal_weight_count(spec) << " temporal weights added\n";
  return kExitOk;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const LabeledClips data = load_dataset(a.data);
  const Shape5 clip = data.clips.front().shape();
  Network<float> net;
  if (!a.init.empty()) {
    net = load_network(a.init);
  } else {
    ArchSpec spec = ArchSpec::reduced(a.depth, parse_policy(a.blocks), data.num_classes());
    spec.in_channels = static_cast<int>(clip.c);
    spec.input = {static_cast<int>(clip.t), static_cast<int>(clip.h), static_cast<int>(clip.w)};
    net = build_network<float>(spec, InitRule{a.seed});
  }

  TrainConfig cfg;
  cfg.lr = a.lr;
  cfg.lr_step = a.lr_step;
  cfg.momentum = a.momentum;
  cfg.weight_decay = a.weight_decay;
  cfg.batch = a.batch;
  cfg.iters = a.iters;
  cfg.dropout_rate = a.dropout;
  cfg.seed = a.seed;
  cfg.freeze_bn = a.freeze_bn;
  cfg.stop_at_accuracy = a.stop_at;

  const TrainHook hook = [&](const TrainRecord& r) {
    if (a.print_every <= 0 || (r.iter % a.print_every != 0 && r.iter + 1 != a.iters)) return;
    char line[128];
    std::snprintf(line, sizeof line, "iter %6d  lr %-8g  loss %.5f  acc %.3f\n", r.iter, r.lr,
                  r.loss, r.accuracy);
    out << line << std::flush;
  };
  const TrainLog log = train(net, data, cfg, hook);
  if (!a.log.empty()) {
    std::ofstream f(a.log);
    f << log.to_text();
    if (!f) throw DataError("cannot write '" + a.log + "'");
  }
  save_checkpoint(net, a.ckpt);
  char line[128];
  std::snprintf(line, sizeof line, "train accuracy (inference BN) %.3f, checkpoint %s\n",
                evaluate(net, data, a.batch), a.ckpt.c_str());
  out << line;
  return kExitOk;
}

int run_extract(const ExtractArgs& a, std::ostream& out) {
  Network<float> net = load_network(a.ckpt);
  const ClipSource video = load_video(a.video);
  ExtractConfig cfg;
  cfg.num_clips = a.clips;
  cfg.seed = a.seed;
  cfg.mode = a.mode == "nonoverlap" ? SampleMode::kNonOverlap : SampleMode::kUniformRandom;
  if (!a.resize.empty()) {
    const auto [h, w] = parse_extent(a.resize);
    cfg.resize = Extent2{h, w};
  }
  const auto per_clip = extract_clip_features(net, video, cfg);
  const std::vector<float> feature = average_features(per_clip);
  write_features(a.out, feature);
  out << "wrote " << a.out << ": " << feature.size() << "-d feature averaged over "
      << per_clip.size() << " clips of " << video.frame_count() << " frames\n";
  return kExitOk;
}

int run_bench(const BenchArgs& a, std::ostream& out) {
  BenchConfig cfg;
  cfg.geometry = parse_geometry(a.input);
  Network<float> net = load_network(a.ckpt);
  cfg.iters = a.iters;
  cfg.batch = a.batch;
  std::vector<int> thread_counts{1};
  if (a.threads != 1) thread_counts.push_back(a.threads);
  for (int k : thread_counts) {
    cfg.threads = k;
    out << format_bench(bench(net, cfg));
  }
  if (a.compare) {
    cfg.threads = a.threads;
    out << format_comparison(bench_block_kinds(net.spec(), cfg));
  }
  return kExitOk;
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  const ClipGeometry g = parse_geometry(a.input);
  const LabeledClips data = make_motion_dataset(
      a.per_class,
      MotionGeometry{3, static_cast<std::size_t>(g.frames), static_cast<std::size_t>(g.height),
                     static_cast<std::size_t>(g.width)},
      a.seed);
  save_dataset(a.out, data);
  out << "wrote " << data.size() << " clips to " << a.out << '\n';
  return kExitOk;
}

}  // namespace p3d::cli
