#include "covact/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "covact/covariance.hpp"
#include "covact/error.hpp"
#include "covact/spd.hpp"

namespace covact {

void StreamAnnotation::validate() const {
  std::size_t expected = 0;
  for (const auto& s : segments) {
    if (s.start != expected) throw data_error("annotation segments are not contiguous");
    if (s.end <= s.start) throw data_error("annotation segment is empty");
    expected = s.end;
  }
}

StitchedStream stitch(std::span<const LabeledInstance> instances, std::uint64_t seed) {
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with an explicit engine so the order is portable.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  StitchedStream out;
  for (std::size_t idx : order) {
    const auto& instance = instances[idx];
    if (instance.frames.empty()) continue;
    const std::size_t start = out.frames.size();
    out.frames.insert(out.frames.end(), instance.frames.begin(), instance.frames.end());
    out.annotation.segments.push_back({start, out.frames.size(), instance.label});
  }
  return out;
}

namespace {

/// Maximal runs of constant emitted label; a run lasts until the next one.
struct LabelRun {
  std::size_t start;
  int label;
};

std::vector<LabelRun> label_runs(std::span<const RecognitionEvent> events) {
  std::vector<LabelRun> runs;
  for (const auto& e : events) {
    if (!runs.empty() && e.frame_index < runs.back().start) {
      throw data_error("events are not sorted by frame");
    }
    if (runs.empty() || runs.back().label != e.label) runs.push_back({e.frame_index, e.label});
  }
  return runs;
}

struct SegmentOutcome {
  std::size_t correct = 0;
  std::optional<std::size_t> first_correct;  // offset from segment start
};

std::vector<SegmentOutcome> score_segments(std::span<const RecognitionEvent> events,
                                           const StreamAnnotation& annotation) {
  annotation.validate();
  const std::vector<LabelRun> runs = label_runs(events);
  std::vector<SegmentOutcome> out(annotation.segments.size());
  std::size_t first_run = 0;
  for (std::size_t s = 0; s < annotation.segments.size(); ++s) {
    const Segment& seg = annotation.segments[s];
    while (first_run + 1 < runs.size() && runs[first_run + 1].start <= seg.start) ++first_run;
    for (std::size_t r = first_run; r < runs.size() && runs[r].start < seg.end; ++r) {
      const std::size_t run_end = r + 1 < runs.size() ? runs[r + 1].start : seg.end;
      const std::size_t lo = std::max(seg.start, runs[r].start);
      const std::size_t hi = std::min(seg.end, run_end);
      if (hi <= lo || runs[r].label != seg.label) continue;
      out[s].correct += hi - lo;
      if (!out[s].first_correct) out[s].first_correct = lo - seg.start;
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace

std::vector<std::optional<double>> latency(std::span<const RecognitionEvent> events,
                                           const StreamAnnotation& annotation) {
  const auto outcomes = score_segments(events, annotation);
  std::vector<std::optional<double>> out(outcomes.size());
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    if (outcomes[s].first_correct) {
      out[s] = static_cast<double>(*outcomes[s].first_correct) /
               static_cast<double>(annotation.segments[s].length());
    }
  }
  return out;
}

std::map<int, double> miss_rate(std::span<const RecognitionEvent> events,
                                const StreamAnnotation& annotation) {
  const auto outcomes = score_segments(events, annotation);
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // label -> (n, detected)
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    auto& [n, m] = counts[annotation.segments[s].label];
    ++n;
    if (outcomes[s].correct > 0) ++m;
  }
  std::map<int, double> out;
  for (const auto& [label, nm] : counts) {
    out[label] = static_cast<double>(nm.first - nm.second) / static_cast<double>(nm.first);
  }
  return out;
}

std::vector<std::optional<double>> error_rate(std::span<const RecognitionEvent> events,
                                              const StreamAnnotation& annotation) {
  const auto outcomes = score_segments(events, annotation);
  std::vector<std::optional<double>> out(outcomes.size());
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    if (outcomes[s].correct == 0) continue;
    const std::size_t length = annotation.segments[s].length();
    out[s] = static_cast<double>(length - outcomes[s].correct) / static_cast<double>(length);
  }
  return out;
}

std::vector<int> frame_labels(std::span<const RecognitionEvent> events, std::size_t frame_count) {
  std::vector<int> out(frame_count, 0);
  const auto runs = label_runs(events);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const std::size_t end = r + 1 < runs.size() ? runs[r + 1].start : frame_count;
    for (std::size_t f = runs[r].start; f < std::min(end, frame_count); ++f) out[f] = runs[r].label;
  }
  return out;
}

void MetricsAccumulator::add_stream(std::span<const RecognitionEvent> events,
                                    const StreamAnnotation& annotation,
                                    std::size_t dropped_frames) {
  const auto lat = latency(events, annotation);
  const auto err = error_rate(events, annotation);
  for (std::size_t s = 0; s < annotation.segments.size(); ++s) {
    outcomes_.push_back({annotation.segments[s].label, lat[s], err[s]});
  }
  dropped_ += dropped_frames;
  ++streams_;
}

MetricsReport MetricsAccumulator::report(const RecognizerConfig& config) const {
  MetricsReport rep;
  rep.config = config;
  rep.dropped_frames = dropped_;
  rep.streams = streams_;

  std::map<int, std::vector<double>> lat_by_class;
  std::map<int, std::vector<double>> err_by_class;
  std::vector<double> lat_all;
  std::vector<double> err_all;
  for (const auto& o : outcomes_) {
    auto& cls = rep.per_class[o.label];
    ++cls.segments;
    ++rep.segments;
    lat_by_class[o.label];
    err_by_class[o.label];
    if (!o.latency) continue;
    ++cls.detected;
    ++rep.detected;
    lat_by_class[o.label].push_back(*o.latency);
    lat_all.push_back(*o.latency);
    if (o.error) {
      err_by_class[o.label].push_back(*o.error);
      err_all.push_back(*o.error);
    }
  }

  std::vector<double> macro_lat;
  std::vector<double> macro_miss;
  std::vector<double> macro_err;
  for (auto& [label, cls] : rep.per_class) {
    cls.latency = mean_of(lat_by_class[label]);
    cls.error_rate = mean_of(err_by_class[label]);
    cls.miss_rate = static_cast<double>(cls.segments - cls.detected) /
                    static_cast<double>(cls.segments);
    if (cls.latency) macro_lat.push_back(*cls.latency);
    if (cls.error_rate) macro_err.push_back(*cls.error_rate);
    macro_miss.push_back(cls.miss_rate);
  }
  rep.mean_latency = mean_of(lat_all);
  rep.mean_error_rate = mean_of(err_all);
  rep.miss_rate = rep.segments == 0 ? 0.0
                                    : static_cast<double>(rep.segments - rep.detected) /
                                          static_cast<double>(rep.segments);
  rep.macro_latency = mean_of(macro_lat);
  rep.macro_error_rate = mean_of(macro_err);
  rep.macro_miss_rate = mean_of(macro_miss).value_or(0.0);
  return rep;
}

namespace {

std::string fmt_value(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string fmt_percent(std::optional<double> v) {
  if (!v) return "   n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * *v);
  return buf;
}

}  // namespace

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << "online action recognition report\n";
  os << "streams: " << r.streams << "  segments: " << r.segments << "  detected: " << r.detected
     << "  dropped frames: " << r.dropped_frames << "\n";
  os << "config: decay=" << fmt_value(r.config.decay) << " init_frames=" << r.config.init_frames
     << " target_dim=" << r.config.target_dim << " std_window=" << r.config.std_window
     << " epsilon=" << r.config.epsilon
     << " reset_on_boundary=" << (r.config.reset_on_boundary ? "on" : "off")
     << " frame_weighting=" << (r.config.frame_weighting ? "on" : "off") << "\n\n";
  os << " class  segments  latency(%)  miss(%)  error(%)\n";
  for (const auto& [label, c] : r.per_class) {
    char line[128];
    std::snprintf(line, sizeof line, "%6d  %8zu      %s   %s    %s\n", label, c.segments,
                  fmt_percent(c.latency).c_str(), fmt_percent(c.miss_rate).c_str(),
                  fmt_percent(c.error_rate).c_str());
    os << line;
  }
  os << "\noverall (pooled over segments)\n";
  os << "  latency(%): " << fmt_percent(r.mean_latency) << "\n";
  os << "  miss(%):    " << fmt_percent(r.miss_rate) << "\n";
  os << "  error(%):   " << fmt_percent(r.mean_error_rate) << "\n";
  os << "macro average over classes\n";
  os << "  latency(%): " << fmt_percent(r.macro_latency) << "\n";
  os << "  miss(%):    " << fmt_percent(r.macro_miss_rate) << "\n";
  os << "  error(%):   " << fmt_percent(r.macro_error_rate) << "\n";
  return os.str();
}

std::string format_report_kv(const MetricsReport& r) {
  std::ostringstream os;
  os << "streams=" << r.streams << "\n";
  os << "segments=" << r.segments << "\n";
  os << "detected=" << r.detected << "\n";
  os << "dropped_frames=" << r.dropped_frames << "\n";
  os << "config.decay=" << fmt_value(r.config.decay) << "\n";
  os << "config.init_frames=" << r.config.init_frames << "\n";
  os << "config.target_dim=" << r.config.target_dim << "\n";
  os << "config.std_window=" << r.config.std_window << "\n";
  os << "config.reset_on_boundary=" << (r.config.reset_on_boundary ? 1 : 0) << "\n";
  os << "config.frame_weighting=" << (r.config.frame_weighting ? 1 : 0) << "\n";
  os << "latency=" << fmt_value(r.mean_latency) << "\n";
  os << "miss_rate=" << fmt_value(r.miss_rate) << "\n";
  os << "error_rate=" << fmt_value(r.mean_error_rate) << "\n";
  os << "macro.latency=" << fmt_value(r.macro_latency) << "\n";
  os << "macro.miss_rate=" << fmt_value(r.macro_miss_rate) << "\n";
  os << "macro.error_rate=" << fmt_value(r.macro_error_rate) << "\n";
  for (const auto& [label, c] : r.per_class) {
    const std::string p = "class." + std::to_string(label) + ".";
    os << p << "segments=" << c.segments << "\n";
    os << p << "latency=" << fmt_value(c.latency) << "\n";
    os << p << "miss_rate=" << fmt_value(c.miss_rate) << "\n";
    os << p << "error_rate=" << fmt_value(c.error_rate) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

struct ClassGenerator {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower factor of cov
};

struct SynthWorld {
  JointLayout layout;
  Eigen::VectorXd neutral;  // normalized features
  std::vector<ClassGenerator> classes;
};

Eigen::MatrixXd random_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

SynthWorld build_world(const SynthConfig& config) {
  if (config.classes < 2) throw usage_error("synthesis needs at least two classes");
  if (config.feature_dim < 9 || config.feature_dim % 3 != 0) {
    throw usage_error("synthetic feature dimension must be a multiple of 3 and at least 9");
  }
  SynthWorld world;
  world.layout = JointLayout::generic(config.feature_dim / 3 + 1);
  const auto d = static_cast<Eigen::Index>(config.feature_dim);
  const Eigen::Index free_dims = d - 6;  // spine and shoulder center are fixed

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> spread(-0.8, 0.8);

  // Feature order skips the hip: spine, shoulder center, then free joints.
  world.neutral = Eigen::VectorXd::Zero(d);
  world.neutral.segment<3>(0) = Eigen::Vector3d(0.0, 1.0, 0.0);
  world.neutral.segment<3>(3) = Eigen::Vector3d(0.0, 2.0, 0.0);
  for (Eigen::Index i = 6; i < d; ++i) world.neutral(i) = spread(rng);

  // Spectrum shared by all classes; the classes differ in orientation.
  Eigen::VectorXd spectrum(free_dims);
  for (Eigen::Index i = 0; i < free_dims; ++i) {
    spectrum(i) = 0.3 * std::pow(config.spectrum_ratio,
                                 static_cast<double>(i) /
                                     static_cast<double>(std::max<Eigen::Index>(1, free_dims - 1)));
  }

  constexpr int kMaxAttempts = 200;
  for (std::size_t l = 0; l < config.classes; ++l) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const Eigen::MatrixXd rotation = qr_retract(random_normal(rng, free_dims, free_dims));
      Eigen::MatrixXd cov = rotation * spectrum.asDiagonal() * rotation.transpose();
      symmetrize(cov);
      const SpdMatrix candidate(cov);
      placed = std::all_of(world.classes.begin(), world.classes.end(), [&](const ClassGenerator& g) {
        return stein_divergence(candidate, SpdMatrix(g.cov)) >= config.separation_floor;
      });
      if (!placed) continue;
      ClassGenerator gen;
      gen.mean = 0.25 * random_normal(rng, free_dims, 1).col(0);
      gen.chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
      gen.cov = std::move(cov);
      world.classes.push_back(std::move(gen));
    }
    if (!placed) throw data_error("inseparable synthesis");
  }
  return world;
}

/// Inverse of normalize_skeleton for a random body scale and position.
SkeletonFrame to_skeleton(const Eigen::VectorXd& features, const JointLayout& layout,
                          double scale, const Eigen::Vector3d& origin) {
  const auto k = static_cast<Eigen::Index>(layout.joint_count());
  SkeletonFrame frame;
  frame.joints.resize(3, k);
  Eigen::Index slot = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (j == static_cast<Eigen::Index>(layout.hip_center)) {
      frame.joints.col(j) = origin;
      continue;
    }
    frame.joints.col(j) = origin + scale * features.segment<3>(3 * slot);
    ++slot;
  }
  return frame;
}

/// 0 while idle at either end, a raised-cosine ramp, then 1.
double envelope(std::size_t tau, std::size_t length, double idle_head, double idle_tail,
                double ramp_fraction) {
  const double n = static_cast<double>(length);
  const double ramp = std::max(1.0, ramp_fraction * n);
  const double t = static_cast<double>(tau) - std::floor(idle_head * n);
  const double from_end = n - 1.0 - std::floor(idle_tail * n) - static_cast<double>(tau);
  const double x = std::min({1.0, t / ramp, from_end / ramp});
  return 0.5 - 0.5 * std::cos(M_PI * std::max(0.0, x));
}

std::vector<LabeledInstance> sample_instances(const SynthWorld& world, const SynthConfig& config,
                                              std::size_t per_class, std::uint64_t sample_seed) {
  if (config.frames_per_instance < 2) throw usage_error("instances need at least two frames");
  std::mt19937_64 rng(sample_seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> body_scale(0.35, 0.6);
  std::uniform_real_distribution<double> position(-1.0, 1.0);
  std::uniform_real_distribution<double> idle(0.0, 2.0 * config.idle_fraction);
  const auto d = static_cast<Eigen::Index>(config.feature_dim);
  const Eigen::Index free_dims = d - 6;
  constexpr double kSensorNoise = 0.01;

  std::vector<LabeledInstance> out;
  out.reserve(per_class * world.classes.size());
  for (std::size_t l = 0; l < world.classes.size(); ++l) {
    const ClassGenerator& gen = world.classes[l];
    for (std::size_t n = 0; n < per_class; ++n) {
      LabeledInstance instance;
      instance.label = static_cast<int>(l) + 1;
      const double scale = body_scale(rng);
      const Eigen::Vector3d origin(position(rng), position(rng), 2.0 + position(rng));
      const double idle_head = idle(rng);
      const double idle_tail = idle(rng);
      for (std::size_t tau = 0; tau < config.frames_per_instance; ++tau) {
        Eigen::VectorXd z(free_dims);
        for (Eigen::Index i = 0; i < free_dims; ++i) z(i) = normal(rng);
        Eigen::VectorXd f = world.neutral;
        const double a =
            envelope(tau, config.frames_per_instance, idle_head, idle_tail, config.ramp_fraction);
        Eigen::VectorXd motion = gen.mean + config.motion_scale * (gen.chol * z);
        for (Eigen::Index i = 0; i < free_dims; ++i) {
          f(6 + i) += a * motion(i) + ((1.0 - a) * config.idle_jitter + kSensorNoise) * normal(rng);
        }
        instance.frames.push_back(to_skeleton(f, world.layout, scale, origin));
      }
      out.push_back(std::move(instance));
    }
  }
  return out;
}

}  // namespace

SynthData synth_classes(const SynthConfig& config) {
  const SynthWorld world = build_world(config);
  SynthData data;
  data.layout = world.layout;
  data.neutral_frame = to_skeleton(world.neutral, world.layout, 0.5, Eigen::Vector3d(0, 0, 2));
  data.instances = sample_instances(world, config, config.instances_per_class,
                                    config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (const auto& c : world.classes) data.class_covariances.push_back(c.cov);
  return data;
}

std::vector<LabeledInstance> synth_more_instances(const SynthConfig& config,
                                                  std::size_t instances_per_class,
                                                  std::uint64_t sample_seed) {
  return sample_instances(build_world(config), config, instances_per_class, sample_seed);
}

std::vector<StitchedStream> synth_test_streams(const SynthConfig& config, std::size_t streams,
                                               std::size_t segments) {
  if (segments == 0) throw usage_error("a test stream needs at least one segment");
  const SynthWorld world = build_world(config);
  const std::size_t classes = world.classes.size();
  const std::size_t per_class = (segments + classes - 1) / classes;
  std::vector<StitchedStream> out;
  out.reserve(streams);
  for (std::size_t s = 0; s < streams; ++s) {
    const std::uint64_t stream_seed = config.seed * 1000003ULL + 7919ULL * (s + 1);
    const auto pool = sample_instances(world, config, per_class, stream_seed);
    // Round robin over classes so every class appears about equally often.
    std::vector<LabeledInstance> picked;
    picked.reserve(segments);
    for (std::size_t i = 0; i < segments; ++i) {
      picked.push_back(pool[(i % classes) * per_class + i / classes]);
    }
    out.push_back(stitch(picked, stream_seed));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

volatile double g_sink = 0.0;

}  // namespace

std::vector<BenchRow> bench_update(const BenchConfig& config) {
  if (config.dim < 1 || config.total_frames < 3) throw usage_error("bench needs d >= 1 and >= 3 frames");
  if (config.repetitions < 1 || config.inner_updates < 1) throw usage_error("bench repetitions must be positive");
  std::vector<std::size_t> checkpoints = config.checkpoints;
  if (checkpoints.empty()) {
    for (std::size_t c : {100, 300, 1000, 3000, 10000, 30000, 100000}) {
      if (c <= config.total_frames) checkpoints.push_back(c);
    }
    if (checkpoints.empty() || checkpoints.back() != config.total_frames) {
      checkpoints.push_back(config.total_frames);
    }
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.front() < 2 || checkpoints.back() > config.total_frames) {
    throw usage_error("bench checkpoints must lie in [2, total frames]");
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  const auto d = static_cast<Eigen::Index>(config.dim);
  const std::size_t needed = config.total_frames + config.inner_updates;
  std::vector<WeightedFrame> frames(needed);
  for (auto& f : frames) {
    f.feature.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) f.feature(i) = normal(rng);
    f.frame_weight = weight(rng);
  }

  const std::size_t init = std::min<std::size_t>(30, checkpoints.front());
  auto state = WeightedCovarianceState::initialize(std::span(frames).first(init), kDefaultDecay);

  std::vector<BenchRow> rows;
  for (std::size_t checkpoint : checkpoints) {
    while (state.frame_count() < checkpoint) state.update(frames[state.frame_count()]);

    BenchRow row;
    row.frame = checkpoint;
    std::vector<double> inc;
    for (std::size_t rep = 0; rep <= config.repetitions; ++rep) {
      WeightedCovarianceState copy = state;
      const auto t0 = Clock::now();
      for (std::size_t j = 0; j < config.inner_updates; ++j) copy.update(frames[checkpoint + j]);
      const auto t1 = Clock::now();
      g_sink = g_sink + copy.cov()(0, 0);
      if (rep > 0) {
        inc.push_back(std::chrono::duration<double>(t1 - t0).count() /
                      static_cast<double>(config.inner_updates));
      }
    }
    row.incremental_seconds = median(inc);

    if (config.with_batch) {
      std::vector<double> batch;
      const auto prefix = std::span(frames).first(checkpoint);
      for (std::size_t rep = 0; rep <= config.repetitions; ++rep) {
        const auto t0 = Clock::now();
        const WeightedMoments m = batch_weighted_covariance(prefix, kDefaultDecay);
        const auto t1 = Clock::now();
        g_sink = g_sink + m.cov(0, 0);
        if (rep > 0) batch.push_back(std::chrono::duration<double>(t1 - t0).count());
      }
      row.batch_seconds = median(batch);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_bench(std::span<const BenchRow> rows) {
  std::ostringstream os;
  os << "# frame\tincremental_seconds\tbatch_seconds\n";
  for (const auto& r : rows) {
    char line[128];
    if (r.batch_seconds) {
      std::snprintf(line, sizeof line, "%zu\t%.9e\t%.9e\n", r.frame, r.incremental_seconds,
                    *r.batch_seconds);
    } else {
      std::snprintf(line, sizeof line, "%zu\t%.9e\tnan\n", r.frame, r.incremental_seconds);
    }
    os << line;
  }
  return os.str();
}

}  // namespace covact
