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
#include <CLI11.hpp>

#include <functional>
#include <iostream>

#include "commands.hpp"
#include "p3d/error.hpp"

namespace {

using namespace p3d::cli;

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const p3d::SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const p3d::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const p3d::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-3D residual networks for video clips"};
  app.require_subcommand(1);
  std::function<int()> action;

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build a randomly initialized network checkpoint");
  b->add_option("--depth", build.depth, "50 or 152")->check(CLI::IsMember({50, 152}));
  b->add_option("--blocks", build.blocks, "Block policy")
      ->check(CLI::IsMember({"2d", "a", "b", "c", "mixed"}));
  b->add_option("--classes", build.classes, "Classifier width")->check(CLI::PositiveNumber);
  b->add_option("--out", build.out, "Output checkpoint")->required();
  b->add_option("--seed", build.seed, "Initialization seed");
  b->add_option("--input", build.input, "Nominal clip geometry T,H,W");
  b->add_flag("--reduced", build.reduced, "Narrow widths for CPU-scale experiments");
  b->callback([&] { action = [&] { return run_build(build, std::cout); }; });

  SummaryArgs summary;
  auto* s = app.add_subcommand("summary", "Print the layer table and parameter totals");
  s->add_option("--ckpt", summary.ckpt, "Checkpoint")->required();
  s->add_option("--input", summary.input, "Clip geometry T,H,W (default: the stored one)");
  s->add_flag("--with-running-stats", summary.include_running_stats,
              "Count BN running statistics in the model size");
  s->callback([&] { action = [&] { return run_summary(summary, std::cout); }; });

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient checks in 64-bit");
  auto* op_opt = g->add_option("--op", gc.op, "Single op to check");
  auto* all_opt = g->add_flag("--all", gc.all, "Check every op");
  op_opt->excludes(all_opt);
  g->add_flag("--list", gc.list, "List op names");
  g->add_option("--seed", gc.seed, "Probe seed");
  g->add_flag("--verbose", gc.verbose, "Print the worst direction of every probe");
  g->add_option("--tol", gc.tolerance, "Relative error bound")->check(CLI::PositiveNumber);
  g->callback([&] { action = [&] { return run_gradcheck(gc, std::cout); }; });

  InflateArgs inf;
  auto* i = app.add_subcommand("inflate", "Initialize a P3D network from a 2D checkpoint");
  i->add_option("--from2d", inf.from2d, "2D checkpoint")->required();
  i->add_option("--into", inf.into, "Output P3D checkpoint")->required();
  i->add_option("--temporal", inf.temporal, "Temporal kernel init")
      ->check(CLI::IsMember({"identity", "zeros", "random"}));
  i->add_option("--blocks", inf.blocks, "Block policy of the result")
      ->check(CLI::IsMember({"a", "b", "c", "mixed"}));
  i->add_option("--depth", inf.depth, "Depth when the 2D checkpoint has no architecture record")
      ->check(CLI::IsMember({50, 152}));
  i->add_option("--seed", inf.seed, "Seed for random temporal init");
  i->callback([&] { action = [&] { return run_inflate(inf, std::cout); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "SGD training on a labeled clip directory");
  t->add_option("--data", tr.data, "Dataset directory (labels.txt + .clp)")->required();
  t->add_option("--lr", tr.lr, "Initial learning rate");
  t->add_option("--lr-step", tr.lr_step, "Iterations between divisions by 10");
  t->add_option("--momentum", tr.momentum, "SGD momentum");
  t->add_option("--wd", tr.weight_decay, "Weight decay on conv and fc weights");
  t->add_option("--batch", tr.batch, "Batch size");
  t->add_option("--iters", tr.iters, "Iterations");
  t->add_option("--dropout", tr.dropout, "Dropout rate before the classifier");
  t->add_option("--seed", tr.seed, "Seed for init, batching and dropout");
  t->add_option("--ckpt", tr.ckpt, "Output checkpoint")->required();
  t->add_option("--init", tr.init, "Start from this checkpoint instead of a fresh network");
  t->add_option("--blocks", tr.blocks, "Block policy of a fresh network")
      ->check(CLI::IsMember({"2d", "a", "b", "c", "mixed"}));
  t->add_option("--depth", tr.depth, "Depth of a fresh network")->check(CLI::IsMember({50, 152}));
  t->add_flag("--freeze-bn", tr.freeze_bn, "Freeze all BN layers except the first");
  t->add_option("--log", tr.log, "Write the per-iteration log here");
  t->add_option("--print-every", tr.print_every, "Progress interval (0 = quiet)");
  t->add_option("--stop-at", tr.stop_at, "Stop once a batch reaches this accuracy");
  t->callback([&] { action = [&] { return run_train(tr, std::cout); }; });

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract", "Clip-averaged pool5 video descriptor");
  e->add_option("--ckpt", ex.ckpt, "Checkpoint")->required();
  e->add_option("--video", ex.video, "Frame directory or .clp file")->required();
  e->add_option("--clips", ex.clips, "Clips to average")->check(CLI::PositiveNumber);
  e->add_option("--out", ex.out, "Output features.bin")->required();
  e->add_option("--mode", ex.mode, "Clip sampling")->check(CLI::IsMember({"random", "nonoverlap"}));
  e->add_option("--resize", ex.resize, "Resize frames to H,W before cropping");
  e->add_option("--seed", ex.seed, "Sampling seed");
  e->callback([&] { action = [&] { return run_extract(ex, std::cout); }; });

  BenchArgs be;
  auto* bn = app.add_subcommand("bench", "Inference throughput and per-layer timing");
  bn->add_option("--ckpt", be.ckpt, "Checkpoint")->required();
  bn->add_option("--input", be.input, "Clip geometry T,H,W");
  bn->add_option("--iters", be.iters, "Timed runs")->check(CLI::PositiveNumber);
  bn->add_option("--threads", be.threads, "Worker threads (0 = default)");
  bn->add_option("--batch", be.batch, "Clips per forward pass")->check(CLI::PositiveNumber);
  bn->add_flag("--compare", be.compare, "Also time all-A, all-B and all-C variants");
  bn->callback([&] { action = [&] { return run_bench(be, std::cout); }; });

  SynthArgs sy;
  auto* y = app.add_subcommand("synth", "Write the synthetic motion-direction dataset");
  y->add_option("--out", sy.out, "Output directory")->required();
  y->add_option("--per-class", sy.per_class, "Clips per class")->check(CLI::PositiveNumber);
  y->add_option("--input", sy.input, "Clip geometry T,H,W");
  y->add_option("--seed", sy.seed, "Seed");
  y->callback([&] { action = [&] { return run_synth(sy, std::cout); }; });

  SelftestArgs st;
  auto* x = app.add_subcommand("selftest", "Oracle and inflation equivalence suites");
  x->add_option("--seed", st.seed, "Seed");
  x->add_flag("--quick", st.quick, "Fewer random cases");
  x->callback([&] { action = [&] { return run_selftest(st, std::cout); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  return guarded(action);
}
