#include "covact/commands.hpp"

#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "covact/error.hpp"

namespace covact {

namespace fs = std::filesystem;

namespace {

void require_layout(const JointLayout& expected, const JointLayout& got, const fs::path& path) {
  if (got.joint_count() != expected.joint_count()) {
    throw data_error("'" + path.string() + "' has K=" + std::to_string(got.joint_count()) +
                     ", expected K=" + std::to_string(expected.joint_count()));
  }
  if (!(got == expected)) {
    throw data_error("'" + path.string() + "' uses a different joint layout");
  }
}

}  // namespace

TrainingReport cmd_train(const TrainOptions& options, std::ostream& log) {
  const auto manifest = load_training_manifest(options.data);
  if (manifest.empty()) throw data_error("training manifest is empty");

  std::vector<LabeledInstance> instances;
  std::optional<JointLayout> layout;
  for (const auto& entry : manifest) {
    StreamData data = load_stream(entry.stream);
    if (!layout) layout = data.layout;
    require_layout(*layout, data.layout, entry.stream);
    instances.push_back({entry.label, std::move(data.frames)});
  }

  const StreamData neutral_stream = load_stream(options.neutral);
  require_layout(*layout, neutral_stream.layout, options.neutral);
  if (options.neutral_frame >= neutral_stream.frames.size()) {
    throw data_error("neutral frame " + std::to_string(options.neutral_frame) +
                     " is out of range");
  }
  const NeutralPose neutral =
      neutral_from_frame(neutral_stream.frames[options.neutral_frame], *layout);

  RecognizerConfig config;
  config.decay = options.eta;
  config.init_frames = options.init_frames;
  config.target_dim = options.dim.value_or(default_target_dim(layout->feature_dim()));
  config.frame_weighting = options.frame_weighting;
  ProjectionConfig projection;
  projection.init = options.init;
  projection.seed = options.seed;

  TrainingReport report;
  const TrainedModel model = train(instances, *layout, neutral, config, projection, &report);
  save_model(options.out, model);

  for (const auto& action : model.classes) {
    log << "class " << action.label << ": " << action.descriptors.size() << " descriptors\n";
  }
  log << "objective: " << format_double(report.initial_objective) << " -> "
      << format_double(report.final_objective) << " after " << report.iterations
      << " iterations\n";
  log << "orthonormality error: " << format_double(orthonormality_error(model.projection.matrix()))
      << '\n';
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return report;
}

std::vector<FrameRecord> record_stream(std::shared_ptr<const TrainedModel> model,
                                       std::span<const SkeletonFrame> frames) {
  Recognizer recognizer(std::move(model));
  std::vector<FrameRecord> records;
  records.reserve(frames.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& frame : frames) {
    const std::size_t dropped = recognizer.dropped_frames();
    const std::size_t index = recognizer.frame_index();
    if (auto event = recognizer.step(frame)) {
      records.push_back({event->frame_index, event->label, to_string(event->kind),
                         event->min_distance, event->std_dev, std::move(event->distances)});
    } else {
      const bool was_dropped = recognizer.dropped_frames() != dropped;
      records.push_back({index, recognizer.current_label(), was_dropped ? "dropped" : "pending",
                         nan, nan, {}});
    }
  }
  return records;
}

void cmd_recognize(const RecognizeOptions& options, std::ostream& log) {
  auto model = std::make_shared<TrainedModel>(load_model(options.model));
  model->config.reset_on_boundary = options.reset_on_boundary;
  const StreamData stream = load_stream(options.stream);
  require_layout(model->layout, stream.layout, options.stream);

  const auto records = record_stream(model, stream.frames);
  std::ostringstream events;
  write_events(events, records);
  write_text_file(options.out, events.str());
  if (options.trace) {
    std::vector<int> labels;
    for (const auto& action : model->classes) labels.push_back(action.label);
    std::ostringstream trace;
    write_trace(trace, records, labels);
    write_text_file(*options.trace, trace.str());
  }

  std::size_t decisions = 0;
  std::size_t boundaries = 0;
  std::size_t dropped = 0;
  for (const auto& rec : records) {
    if (rec.kind == "initial_decision") ++decisions;
    if (rec.kind == "boundary") ++boundaries;
    if (rec.kind == "dropped") ++dropped;
  }
  if (decisions == 0) {
    log << "warning: stream ended before " << model->config.init_frames
        << " usable frames; no decision made\n";
  }
  log << "frames: " << records.size() << ", dropped: " << dropped
      << ", boundaries: " << boundaries << '\n';
}

MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  auto model = std::make_shared<TrainedModel>(load_model(options.model));
  model->config.reset_on_boundary = options.reset_on_boundary;
  const auto manifest = load_evaluation_manifest(options.streams);
  if (manifest.empty()) throw data_error("no streams");

  MetricsAccumulator metrics;
  for (const auto& entry : manifest) {
    const StreamData stream = load_stream(entry.stream);
    require_layout(model->layout, stream.layout, entry.stream);
    const StreamAnnotation annotation = load_annotation(entry.annotation);
    if (annotation.frame_count() != stream.frames.size()) {
      throw data_error("'" + entry.annotation.string() + "' covers " +
                       std::to_string(annotation.frame_count()) + " frames but the stream has " +
                       std::to_string(stream.frames.size()));
    }
    std::size_t dropped = 0;
    const auto events = recognize_stream(model, stream.frames, &dropped);
    metrics.add_stream(events, annotation, dropped);
  }

  const MetricsReport report = metrics.report(model->config);
  write_text_file(options.out, format_report(report));
  if (options.kv) write_text_file(*options.kv, format_report_kv(report));
  log << "streams: " << report.streams << ", segments: " << report.segments
      << ", detected: " << report.detected << '\n';
  return report;
}

void cmd_bench(const BenchOptions& options, std::ostream& log) {
  BenchConfig config;
  config.dim = options.dim;
  config.total_frames = options.frames;
  config.repetitions = options.repetitions;
  config.with_batch = options.batch;
  config.seed = options.seed;
  const auto rows = bench_update(config);
  write_text_file(options.out, format_bench(rows));
  log << "checkpoints: " << rows.size() << '\n';
}

void cmd_synth(const SynthOptions& options, std::ostream& log) {
  if (options.classes < 2) throw usage_error("synthesis needs at least two classes");
  SynthConfig config;
  config.classes = options.classes;
  config.feature_dim = options.dim;
  config.instances_per_class = options.instances;
  config.frames_per_instance = options.frames;
  config.seed = options.seed;
  config.separation_floor = options.separation;
  if (config.feature_dim < 9 || config.feature_dim % 3 != 0) {
    throw usage_error("--dim must be a multiple of 3 and at least 9");
  }

  const SynthData data = synth_classes(config);
  const fs::path& dir = options.out_dir;

  save_stream(dir / "neutral.stream", data.layout, std::span(&data.neutral_frame, 1));

  std::ostringstream manifest;
  std::map<int, std::size_t> seen;
  for (const auto& instance : data.instances) {
    const std::size_t n = seen[instance.label]++;
    const std::string name =
        "train/class" + std::to_string(instance.label) + "_" + std::to_string(n) + ".stream";
    save_stream(dir / name, data.layout, instance.frames);
    manifest << instance.label << ' ' << name << '\n';
  }
  write_text_file(dir / "train.txt", manifest.str());

  std::ostringstream tests;
  const auto streams = synth_test_streams(config, options.test_streams, options.segments);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    const std::string stem = "test/stream" + std::to_string(s);
    save_stream(dir / (stem + ".stream"), data.layout, streams[s].frames);
    save_annotation(dir / (stem + ".ann"), streams[s].annotation);
    tests << stem << ".stream " << stem << ".ann\n";
  }
  write_text_file(dir / "test.txt", tests.str());

  log << "wrote " << data.instances.size() << " training instances and " << streams.size()
      << " test streams to " << dir.string() << '\n';
}

}  // namespace covact
