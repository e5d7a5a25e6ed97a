// covact: train, recognize, evaluate, bench and synth subcommands.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include "covact/commands.hpp"
#include "covact/error.hpp"

namespace {

int fail(int code, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::fprintf(stderr, "covact: error: %s\n", line.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online action recognition with weighted covariance descriptors"};
  app.require_subcommand(1);

  covact::TrainOptions train;
  std::string init = "principal";
  bool no_frame_weights = false;
  auto* train_cmd = app.add_subcommand("train", "Learn a model from labeled streams");
  train_cmd->add_option("--data", train.data, "Manifest of '<label> <stream>' lines")->required();
  train_cmd->add_option("--neutral", train.neutral, "Stream file holding the neutral pose")
      ->required();
  train_cmd->add_option("--neutral-frame", train.neutral_frame, "Frame of --neutral to use");
  train_cmd->add_option("--dim", train.dim, "Target dimension m (default min(10, n))")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--eta", train.eta, "Temporal decay")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--init-frames", train.init_frames, "Frames before the first decision")
      ->check(CLI::Range(2, 1 << 30));
  train_cmd->add_option("--init", init, "Projection start: principal, identity or random")
      ->check(CLI::IsMember({"principal", "identity", "random"}));
  train_cmd->add_option("--seed", train.seed, "Seed of the random projection start");
  train_cmd->add_flag("--no-frame-weights", no_frame_weights, "Give every frame weight 1");
  train_cmd->add_option("--out", train.out, "Model file to write")->required();

  covact::RecognizeOptions recognize;
  auto* recognize_cmd = app.add_subcommand("recognize", "Label a stream frame by frame");
  recognize_cmd->add_option("--model", recognize.model)->required();
  recognize_cmd->add_option("--stream", recognize.stream)->required();
  recognize_cmd->add_option("--out", recognize.out, "Events file to write")->required();
  recognize_cmd->add_option("--trace", recognize.trace, "Per-frame class distances");
  recognize_cmd->add_flag("--reset-on-boundary", recognize.reset_on_boundary);

  covact::EvaluateOptions evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score annotated streams");
  evaluate_cmd->add_option("--model", evaluate.model)->required();
  evaluate_cmd->add_option("--streams", evaluate.streams, "Manifest of '<stream> <annotation>'")
      ->required();
  evaluate_cmd->add_option("--out", evaluate.out, "Report file to write")->required();
  evaluate_cmd->add_option("--kv", evaluate.kv, "Key-value report file to write");
  evaluate_cmd->add_flag("--reset-on-boundary", evaluate.reset_on_boundary);

  covact::BenchOptions bench;
  bool no_batch = false;
  auto* bench_cmd = app.add_subcommand("bench", "Time incremental and batch updates");
  bench_cmd->add_option("--d", bench.dim, "Feature dimension")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--frames", bench.frames)->check(CLI::Range(2, 1 << 30));
  bench_cmd->add_option("--repetitions", bench.repetitions)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_flag("--no-batch", no_batch, "Skip the batch recomputation");
  bench_cmd->add_option("--out", bench.out, "TSV file to write")->required();

  covact::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic data set");
  synth_cmd->add_option("--classes", synth.classes)->check(CLI::Range(2, 1000));
  synth_cmd->add_option("--dim", synth.dim, "Feature dimension, a multiple of 3");
  synth_cmd->add_option("--instances", synth.instances, "Training instances per class")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--frames", synth.frames, "Frames per instance")
      ->check(CLI::Range(2, 1 << 20));
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--test-streams", synth.test_streams);
  synth_cmd->add_option("--segments", synth.segments, "Instances per test stream")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--separation", synth.separation, "Stein floor between classes");
  synth_cmd->add_option("--out-dir", synth.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, e.what());
  }

  static const std::map<std::string, covact::ProjectionInit> inits = {
      {"principal", covact::ProjectionInit::principal},
      {"identity", covact::ProjectionInit::identity},
      {"random", covact::ProjectionInit::random}};

  try {
    if (train_cmd->parsed()) {
      train.init = inits.at(init);
      train.frame_weighting = !no_frame_weights;
      covact::cmd_train(train, std::cout);
    } else if (recognize_cmd->parsed()) {
      covact::cmd_recognize(recognize, std::cerr);
    } else if (evaluate_cmd->parsed()) {
      covact::cmd_evaluate(evaluate, std::cout);
    } else if (bench_cmd->parsed()) {
      bench.batch = !no_batch;
      covact::cmd_bench(bench, std::cout);
    } else if (synth_cmd->parsed()) {
      covact::cmd_synth(synth, std::cout);
    }
  } catch (const covact::Error& e) {
    return fail(e.exit_code(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(3, e.what());
  }
  return 0;
}
