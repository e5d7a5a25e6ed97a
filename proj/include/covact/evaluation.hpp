#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covact/recognizer.hpp"
#include "covact/skeleton.hpp"

namespace covact {

/// Frames [start, end) carry `label`.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  int label = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Ground truth of a stream: contiguous, ordered, non-empty segments
/// starting at frame 0.
struct StreamAnnotation {
  std::vector<Segment> segments;

  std::size_t frame_count() const noexcept {
    return segments.empty() ? 0 : segments.back().end;
  }
  /// Throws Error(data, ...) when the segments do not partition [0, frame_count).
  void validate() const;

  friend bool operator==(const StreamAnnotation&, const StreamAnnotation&) = default;
};

struct StitchedStream {
  std::vector<SkeletonFrame> frames;
  StreamAnnotation annotation;
};

/// Concatenates the instances in a seeded random order.
StitchedStream stitch(std::span<const LabeledInstance> instances, std::uint64_t seed);

/// h / H per segment, where h is the offset of the first frame carrying the
/// true label. Segments that never carry it are empty (they are misses).
std::vector<std::optional<double>> latency(std::span<const RecognitionEvent> events,
                                           const StreamAnnotation& annotation);

/// (n - m) / n per class over its n segments, m of which carry the true
/// label on at least one frame.
std::map<int, double> miss_rate(std::span<const RecognitionEvent> events,
                                const StreamAnnotation& annotation);

/// w / W per detected segment: the fraction of its frames not carrying the
/// true label (undecided frames count as wrong). Empty for missed segments.
std::vector<std::optional<double>> error_rate(std::span<const RecognitionEvent> events,
                                              const StreamAnnotation& annotation);

/// The label a stream shows at every frame: the label of the latest event at
/// or before it, 0 before the first event.
std::vector<int> frame_labels(std::span<const RecognitionEvent> events, std::size_t frame_count);

struct ClassMetrics {
  std::size_t segments = 0;
  std::size_t detected = 0;
  std::optional<double> latency;  // mean over detected segments
  double miss_rate = 0.0;
  std::optional<double> error_rate;  // mean over detected segments
};

struct MetricsReport {
  std::map<int, ClassMetrics> per_class;
  std::size_t segments = 0;
  std::size_t detected = 0;
  /// Pooled over all segments of all streams.
  std::optional<double> mean_latency;
  double miss_rate = 0.0;
  std::optional<double> mean_error_rate;
  /// Unweighted means of the per-class figures.
  std::optional<double> macro_latency;
  double macro_miss_rate = 0.0;
  std::optional<double> macro_error_rate;
  std::size_t dropped_frames = 0;
  std::size_t streams = 0;
  RecognizerConfig config;
};

/// Accumulates per-segment outcomes over any number of streams.
class MetricsAccumulator {
 public:
  void add_stream(std::span<const RecognitionEvent> events, const StreamAnnotation& annotation,
                  std::size_t dropped_frames = 0);
  MetricsReport report(const RecognizerConfig& config) const;

 private:
  struct Outcome {
    int label;
    std::optional<double> latency;
    std::optional<double> error;
  };
  std::vector<Outcome> outcomes_;
  std::size_t dropped_ = 0;
  std::size_t streams_ = 0;
};

/// Structured, human readable report.
std::string format_report(const MetricsReport& report);
/// One `key=value` per line.
std::string format_report_kv(const MetricsReport& report);

struct SynthConfig {
  std::size_t classes = 3;
  std::size_t feature_dim = 18;  // multiple of 3, at least 9
  std::size_t frames_per_instance = 40;
  std::size_t instances_per_class = 5;
  std::uint64_t seed = 0;
  /// Minimum Stein divergence between any two class generator covariances.
  double separation_floor = 1.0;
  /// Mean fraction of an instance held at the neutral pose at each end; each
  /// instance draws its own from [0, 2 * idle_fraction].
  double idle_fraction = 0.1;
  /// Fraction of an instance spent ramping in and out of the neutral pose.
  double ramp_fraction = 0.1;
  /// Class-independent fidgeting around the neutral pose, in normalized units.
  double idle_jitter = 0.05;
  /// Multiplier on the class generator spread.
  double motion_scale = 1.0;
  /// Smallest over largest eigenvalue of each class generator covariance.
  double spectrum_ratio = 0.05;
};

struct SynthData {
  JointLayout layout;
  SkeletonFrame neutral_frame;
  std::vector<LabeledInstance> instances;  // class-major order
  std::vector<Eigen::MatrixXd> class_covariances;
};

/// Seeded pseudo-skeleton action classes. Each class has its own Gaussian
/// feature generator; an instance ramps out of the neutral pose, samples
/// the generator, then ramps back. Frames are randomly translated and
/// scaled before being handed out.
///
/// Throws Error(data, "inseparable synthesis") when the class generators
/// cannot be separated by the requested floor.
SynthData synth_classes(const SynthConfig& config);

/// Draws instances of existing classes from an earlier synth_classes() call
/// with a different sample seed.
std::vector<LabeledInstance> synth_more_instances(const SynthConfig& config,
                                                  std::size_t instances_per_class,
                                                  std::uint64_t sample_seed);

/// Held-out streams of `segments` fresh instances each, classes taken in
/// turn, stitched in a seeded order.
std::vector<StitchedStream> synth_test_streams(const SynthConfig& config, std::size_t streams,
                                               std::size_t segments);

struct BenchRow {
  std::size_t frame = 0;
  double incremental_seconds = 0.0;
  std::optional<double> batch_seconds;
};

struct BenchConfig {
  std::size_t dim = 72;
  std::size_t total_frames = 10000;
  std::vector<std::size_t> checkpoints;  // empty: log-spaced defaults
  std::size_t repetitions = 5;
  std::size_t inner_updates = 200;
  bool with_batch = true;
  std::uint64_t seed = 0;
};

/// Times one incremental update and one full batch recomputation at each
/// checkpoint (median of `repetitions`, one warm-up run discarded).
std::vector<BenchRow> bench_update(const BenchConfig& config);

std::string format_bench(std::span<const BenchRow> rows);

}  // namespace covact
