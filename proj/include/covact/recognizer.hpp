#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covact/covariance.hpp"
#include "covact/skeleton.hpp"
#include "covact/spd.hpp"

namespace covact {

struct RecognizerConfig {
  double decay = kDefaultDecay;
  std::size_t init_frames = 30;
  std::size_t target_dim = 10;
  std::size_t std_window = 5;
  double epsilon = 1e-6;
  bool reset_on_boundary = false;
  /// Off replaces every frame weight by 1.
  bool frame_weighting = true;

  /// Throws Error(usage, ...) on out-of-range settings.
  void validate() const;

  friend bool operator==(const RecognizerConfig&, const RecognizerConfig&) = default;
};

/// Target dimension used when none is requested: 10, capped at n.
std::size_t default_target_dim(std::size_t feature_dim);

struct ActionModel {
  int label = 0;
  std::vector<SpdMatrix> descriptors;  // projected, m x m
};

/// One labeled, segmented action instance.
struct LabeledInstance {
  int label = 0;
  std::vector<SkeletonFrame> frames;
};

/// Everything the online phase needs.
struct TrainedModel {
  RecognizerConfig config;
  JointLayout layout;
  NeutralPose neutral;
  ProjectionMatrix projection = ProjectionMatrix::identity(1, 1);
  std::vector<ActionModel> classes;  // sorted by label

  std::size_t class_count() const noexcept { return classes.size(); }
};

struct TrainingReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t skipped_instances = 0;
  std::vector<std::string> warnings;
};

/// Offline phase: one weighted covariance descriptor per instance, then a
/// discriminative projection learned over all of them.
TrainedModel train(std::span<const LabeledInstance> instances, const JointLayout& layout,
                   const NeutralPose& neutral, const RecognizerConfig& config,
                   const ProjectionConfig& projection_config = {},
                   TrainingReport* report = nullptr);

/// Unprojected descriptor of one instance (normalized frames, temporal and
/// frame weights, regularized). Empty when fewer than two frames survive.
std::optional<SpdMatrix> instance_descriptor(const LabeledInstance& instance,
                                             const JointLayout& layout,
                                             const NeutralPose& neutral,
                                             const RecognizerConfig& config);

/// Smallest Stein divergence between `c` and the model's descriptors.
double class_distance(const SpdMatrix& c, const ActionModel& model);

enum class EventKind { initial_decision, continuation, boundary };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& text);

struct RecognitionEvent {
  std::size_t frame_index = 0;
  int label = 0;
  EventKind kind = EventKind::continuation;
  double min_distance = 0.0;  // NaN while the descriptor is warming up
  double std_dev = 0.0;
  std::vector<double> distances;  // one per class, empty while warming up
};

/// Online phase for one stream. Feed frames in order with step().
///
/// Per-frame cost does not depend on how many frames were seen. The object
/// may be moved between threads but a single instance is not reentrant.
class Recognizer {
 public:
  explicit Recognizer(std::shared_ptr<const TrainedModel> model);

  /// Processes the next stream frame. Frames with missing joints are
  /// dropped: they advance the frame index and the drop counter only.
  std::optional<RecognitionEvent> step(const SkeletonFrame& frame);

  std::size_t frame_index() const noexcept { return frame_index_; }
  std::size_t dropped_frames() const noexcept { return dropped_; }
  /// 0 before the initial decision.
  int current_label() const noexcept { return current_label_; }
  const std::optional<WeightedCovarianceState>& covariance() const noexcept { return cov_; }
  const std::deque<std::vector<double>>& distance_history() const noexcept {
    return distance_history_;
  }
  const std::deque<double>& std_history() const noexcept { return std_history_; }

 private:
  bool std_local_minimum() const;
  std::size_t history_capacity() const noexcept { return model_->config.std_window + 2; }

  std::shared_ptr<const TrainedModel> model_;
  std::optional<WeightedCovarianceState> cov_;
  std::vector<WeightedFrame> warmup_;
  std::deque<std::vector<double>> distance_history_;
  std::deque<double> std_history_;
  int current_label_ = 0;
  bool decided_ = false;
  std::size_t frame_index_ = 0;
  std::size_t dropped_ = 0;
};

/// Population standard deviation.
double population_std(std::span<const double> values);

/// Index of the smallest value; ties go to the lowest index.
std::size_t argmin(std::span<const double> values);

/// Runs a whole stream and collects the emitted events.
std::vector<RecognitionEvent> recognize_stream(std::shared_ptr<const TrainedModel> model,
                                               std::span<const SkeletonFrame> frames,
                                               std::size_t* dropped = nullptr);

}  // namespace covact
