#include "covact/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "covact/error.hpp"

namespace covact {

void RecognizerConfig::validate() const {
  if (!(decay >= 0.0 && decay <= 1.0)) throw usage_error("decay must lie in [0, 1]");
  if (init_frames < 2) throw usage_error("init frames must be at least 2");
  if (std_window < 3 || std_window % 2 == 0) {
    throw usage_error("std window must be odd and at least 3");
  }
  if (target_dim < 1) throw usage_error("target dimension must be positive");
  if (!(epsilon > 0.0)) throw usage_error("regularization epsilon must be positive");
}

std::size_t default_target_dim(std::size_t feature_dim) {
  return std::min<std::size_t>(10, feature_dim);
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::initial_decision: return "initial_decision";
    case EventKind::continuation: return "continuation";
    case EventKind::boundary: return "boundary";
  }
  return "continuation";
}

EventKind event_kind_from_string(const std::string& text) {
  if (text == "initial_decision") return EventKind::initial_decision;
  if (text == "continuation") return EventKind::continuation;
  if (text == "boundary") return EventKind::boundary;
  throw data_error("unknown event kind '" + text + "'");
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Shifted by the first value so equal inputs give exactly zero.
  const double n = static_cast<double>(values.size());
  const double origin = values.front();
  double mean = 0.0;
  for (double v : values) mean += v - origin;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - origin - mean) * (v - origin - mean);
  return std::sqrt(ss / n);
}

std::size_t argmin(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

double class_distance(const SpdMatrix& c, const ActionModel& model) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : model.descriptors) best = std::min(best, stein_divergence(c, d));
  return best;
}

namespace {

std::optional<Eigen::VectorXd> try_normalize(const SkeletonFrame& frame,
                                             const JointLayout& layout) {
  if (static_cast<std::size_t>(frame.joints.cols()) != layout.joint_count()) {
    throw data_error("joint count does not match the model");
  }
  if (!frame.is_complete()) return std::nullopt;
  try {
    return normalize_skeleton(frame, layout);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double weight_of(const Eigen::VectorXd& features, const NeutralPose& neutral,
                 const RecognizerConfig& config) {
  return config.frame_weighting ? frame_weight(features, neutral) : 1.0;
}

/// P^T (C + eps I) P == P^T C P + eps I for orthonormal P, which avoids
/// factorizing the full-size matrix every frame.
SpdMatrix project_running(const ProjectionMatrix& p, const Eigen::MatrixXd& cov, double epsilon) {
  Eigen::MatrixXd projected = p.matrix().transpose() * cov * p.matrix();
  projected.diagonal().array() += epsilon;
  return regularize(projected, 1e-10);
}

}  // namespace

std::optional<SpdMatrix> instance_descriptor(const LabeledInstance& instance,
                                             const JointLayout& layout,
                                             const NeutralPose& neutral,
                                             const RecognizerConfig& config) {
  std::vector<WeightedFrame> frames;
  frames.reserve(instance.frames.size());
  for (const auto& frame : instance.frames) {
    auto features = try_normalize(frame, layout);
    if (!features) continue;
    const double xi = weight_of(*features, neutral, config);
    frames.push_back({std::move(*features), xi});
  }
  if (frames.size() < 2) return std::nullopt;
  const WeightedMoments moments = batch_weighted_covariance(frames, config.decay);
  return regularize(moments.cov, config.epsilon);
}

TrainedModel train(std::span<const LabeledInstance> instances, const JointLayout& layout,
                   const NeutralPose& neutral, const RecognizerConfig& config,
                   const ProjectionConfig& projection_config, TrainingReport* report) {
  config.validate();
  layout.validate();
  if (static_cast<std::size_t>(neutral.features.size()) != layout.feature_dim()) {
    throw data_error("neutral pose does not match the joint layout");
  }
  if (config.target_dim > layout.feature_dim()) {
    throw usage_error("target dimension exceeds the feature dimension");
  }

  TrainingReport local;
  TrainingReport& rep = report ? *report : local;
  rep = {};

  std::vector<SpdMatrix> descriptors;
  std::vector<int> labels;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto descriptor = instance_descriptor(instances[i], layout, neutral, config);
    if (!descriptor) {
      ++rep.skipped_instances;
      rep.warnings.push_back("instance " + std::to_string(i) +
                             " has fewer than 2 usable frames; skipped");
      continue;
    }
    descriptors.push_back(std::move(*descriptor));
    labels.push_back(instances[i].label);
  }
  if (descriptors.empty()) throw data_error("no usable training instances");

  const ProjectionResult learned = learn_projection(
      descriptors, labels, static_cast<Eigen::Index>(config.target_dim), projection_config);
  rep.initial_objective = learned.initial_objective;
  rep.final_objective = learned.final_objective;
  rep.iterations = learned.iterations;
  rep.converged = learned.converged;
  if (!learned.converged) {
    rep.warnings.push_back("projection learning stopped at the iteration limit");
  }

  std::map<int, ActionModel> grouped;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    auto& model = grouped[labels[i]];
    model.label = labels[i];
    model.descriptors.push_back(project(learned.projection, descriptors[i]));
  }

  TrainedModel model{config, layout, neutral, learned.projection, {}};
  for (auto& [label, action] : grouped) model.classes.push_back(std::move(action));
  return model;
}

Recognizer::Recognizer(std::shared_ptr<const TrainedModel> model) : model_(std::move(model)) {
  if (!model_ || model_->classes.empty()) throw data_error("model has no classes");
  model_->config.validate();
  warmup_.reserve(model_->config.init_frames);
}

bool Recognizer::std_local_minimum() const {
  const std::size_t w = model_->config.std_window;
  if (std_history_.size() < w + 2) return false;
  const std::size_t base = std_history_.size() - (w + 2);
  auto smoothed = [&](std::size_t k) {
    return (std_history_[base + k - 1] + std_history_[base + k] + std_history_[base + k + 1]) /
           3.0;
  };
  const double center = smoothed((w + 1) / 2);
  return center < smoothed(1) && center < smoothed(w);
}

std::optional<RecognitionEvent> Recognizer::step(const SkeletonFrame& frame) {
  const TrainedModel& model = *model_;
  const RecognizerConfig& config = model.config;
  const std::size_t index = frame_index_++;

  auto features = try_normalize(frame, model.layout);
  if (!features) {
    ++dropped_;
    return std::nullopt;
  }
  const double xi = weight_of(*features, model.neutral, config);

  if (!cov_) {
    warmup_.push_back({std::move(*features), xi});
    if (warmup_.size() < config.init_frames) {
      if (!decided_) return std::nullopt;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return RecognitionEvent{index, current_label_, EventKind::continuation, nan, nan, {}};
    }
    cov_ = WeightedCovarianceState::initialize(warmup_, config.decay);
    warmup_.clear();
  } else {
    cov_->update(*features, xi);
  }

  const SpdMatrix descriptor = project_running(model.projection, cov_->cov(), config.epsilon);
  std::vector<double> distances(model.classes.size());
  for (std::size_t l = 0; l < model.classes.size(); ++l) {
    distances[l] = class_distance(descriptor, model.classes[l]);
  }
  const double spread = population_std(distances);
  const std::size_t best_index = argmin(distances);
  const int best = model.classes[best_index].label;

  distance_history_.push_back(distances);
  std_history_.push_back(spread);
  while (std_history_.size() > history_capacity()) {
    std_history_.pop_front();
    distance_history_.pop_front();
  }

  RecognitionEvent event{index, best, EventKind::continuation, distances[best_index], spread,
                         std::move(distances)};
  if (!decided_) {
    decided_ = true;
    current_label_ = best;
    event.kind = EventKind::initial_decision;
    return event;
  }
  if (best != current_label_ && std_local_minimum()) {
    current_label_ = best;
    event.kind = EventKind::boundary;
    if (config.reset_on_boundary) {
      // Restart the statistics from the boundary frame.
      cov_.reset();
      warmup_.clear();
      warmup_.push_back({normalize_skeleton(frame, model.layout), xi});
      std_history_.clear();
      distance_history_.clear();
    }
    return event;
  }
  event.label = current_label_;
  return event;
}

std::vector<RecognitionEvent> recognize_stream(std::shared_ptr<const TrainedModel> model,
                                               std::span<const SkeletonFrame> frames,
                                               std::size_t* dropped) {
  Recognizer recognizer(std::move(model));
  std::vector<RecognitionEvent> events;
  events.reserve(frames.size());
  for (const auto& frame : frames) {
    if (auto event = recognizer.step(frame)) events.push_back(std::move(*event));
  }
  if (dropped) *dropped = recognizer.dropped_frames();
  return events;
}

}  // namespace covact
