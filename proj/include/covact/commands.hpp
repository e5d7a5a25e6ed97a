#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covact/evaluation.hpp"
#include "covact/io.hpp"
#include "covact/recognizer.hpp"

// Command implementations behind the covact executable. Each throws
// covact::Error on failure and writes progress to `log`.

namespace covact {

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path neutral;
  std::size_t neutral_frame = 0;
  std::optional<std::size_t> dim;
  double eta = kDefaultDecay;
  std::size_t init_frames = 30;
  std::filesystem::path out;
  ProjectionInit init = ProjectionInit::principal;
  bool frame_weighting = true;
  std::uint64_t seed = 0;
};

TrainingReport cmd_train(const TrainOptions& options, std::ostream& log);

struct RecognizeOptions {
  std::filesystem::path model;
  std::filesystem::path stream;
  std::filesystem::path out;
  std::optional<std::filesystem::path> trace;
  bool reset_on_boundary = false;
};

void cmd_recognize(const RecognizeOptions& options, std::ostream& log);

struct EvaluateOptions {
  std::filesystem::path model;
  std::filesystem::path streams;
  std::filesystem::path out;
  std::optional<std::filesystem::path> kv;
  bool reset_on_boundary = false;
};

MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

struct BenchOptions {
  std::size_t dim = 72;
  std::size_t frames = 10000;
  std::size_t repetitions = 5;
  bool batch = true;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void cmd_bench(const BenchOptions& options, std::ostream& log);

struct SynthOptions {
  std::size_t classes = 3;
  std::size_t dim = 18;
  std::size_t instances = 5;
  std::size_t frames = 40;
  std::uint64_t seed = 0;
  std::size_t test_streams = 3;
  std::size_t segments = 10;
  double separation = 1.0;
  std::filesystem::path out_dir;
};

/// Writes train.txt, neutral.stream, train/*.stream, and test.txt with its
/// test/*.stream and test/*.ann files under `out_dir`.
void cmd_synth(const SynthOptions& options, std::ostream& log);

/// Runs a recognizer over a whole stream and keeps one record per frame.
std::vector<FrameRecord> record_stream(std::shared_ptr<const TrainedModel> model,
                                       std::span<const SkeletonFrame> frames);

}  // namespace covact
