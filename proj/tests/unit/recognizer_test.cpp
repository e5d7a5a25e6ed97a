#include <algorithm>
#include <cmath>
#include <optional>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "covact/error.hpp"
#include "covact/evaluation.hpp"
#include "covact/recognizer.hpp"

using namespace covact;

namespace {

SynthConfig small_world(std::size_t classes, std::size_t instances, std::size_t frames) {
  SynthConfig c;
  c.classes = classes;
  c.instances_per_class = instances;
  c.frames_per_instance = frames;
  c.feature_dim = 12;
  c.seed = 21;
  return c;
}

std::shared_ptr<TrainedModel> train_on(const SynthData& data, RecognizerConfig config = {}) {
  config.target_dim = 4;
  const NeutralPose neutral = neutral_from_frame(data.neutral_frame, data.layout);
  return std::make_shared<TrainedModel>(train(data.instances, data.layout, neutral, config));
}

}  // namespace

TEST(RecognizerConfig, Validation) {
  RecognizerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.std_window = 4;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.decay = 1.2;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.init_frames = 1;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(default_target_dim(57), 10u);
  EXPECT_EQ(default_target_dim(6), 6u);
}

TEST(Helpers, PopulationStdAndArgmin) {
  const std::vector<double> equal{0.7, 0.7, 0.7};
  EXPECT_EQ(population_std(equal), 0.0);
  const std::vector<double> v{1.0, 3.0};
  EXPECT_DOUBLE_EQ(population_std(v), 1.0);
  const std::vector<double> ties{2.0, 1.0, 1.0, 5.0};
  EXPECT_EQ(argmin(ties), 1u);
}

TEST(ClassDistance, MinimumOverDescriptors) {
  const SpdMatrix c(Eigen::MatrixXd::Identity(1, 1));
  ActionModel model{1, {}};
  std::vector<double> expected;
  for (double s : {30.0, 6.0, 12.0}) {
    model.descriptors.emplace_back(Eigen::MatrixXd::Constant(1, 1, s));
    expected.push_back(stein_divergence(c, model.descriptors.back()));
  }
  EXPECT_DOUBLE_EQ(class_distance(c, model), *std::min_element(expected.begin(), expected.end()));
  const double before = class_distance(c, model);
  model.descriptors.emplace_back(Eigen::MatrixXd::Constant(1, 1, 50.0));
  EXPECT_LE(class_distance(c, model), before);
  model.descriptors.push_back(c);
  EXPECT_EQ(class_distance(c, model), 0.0);
}

TEST(Train, TwoByTwoSeparatesClasses) {
  const SynthData data = synth_classes(small_world(2, 2, 60));
  const auto model = train_on(data);
  ASSERT_EQ(model->class_count(), 2u);
  EXPECT_EQ(model->classes[0].label, 1);
  EXPECT_EQ(model->classes[1].label, 2);
  for (const auto& action : model->classes) EXPECT_EQ(action.descriptors.size(), 2u);
  const double within = std::max(stein_divergence(model->classes[0].descriptors[0],
                                                  model->classes[0].descriptors[1]),
                                 stein_divergence(model->classes[1].descriptors[0],
                                                  model->classes[1].descriptors[1]));
  double between = INFINITY;
  for (const auto& a : model->classes[0].descriptors) {
    for (const auto& b : model->classes[1].descriptors) {
      between = std::min(between, stein_divergence(a, b));
    }
  }
  EXPECT_LT(within, between);
}

TEST(Train, SingleInstancePerClass) {
  const SynthData data = synth_classes(small_world(3, 1, 40));
  const auto model = train_on(data);
  EXPECT_EQ(model->class_count(), 3u);
  for (const auto& action : model->classes) EXPECT_EQ(action.descriptors.size(), 1u);
}

TEST(Train, IndistinguishableClassesStillTrain) {
  SynthData data = synth_classes(small_world(2, 2, 40));
  for (auto& instance : data.instances) instance.frames = data.instances[0].frames;
  EXPECT_NO_THROW(train_on(data));
}

TEST(Train, SkipsInstancesWithoutUsableFrames) {
  SynthData data = synth_classes(small_world(2, 3, 40));
  for (auto& frame : data.instances[0].frames) frame.joints(0, 3) = NAN;
  RecognizerConfig config;
  config.target_dim = 4;
  TrainingReport report;
  const NeutralPose neutral = neutral_from_frame(data.neutral_frame, data.layout);
  const TrainedModel model = train(data.instances, data.layout, neutral, config, {}, &report);
  EXPECT_EQ(report.skipped_instances, 1u);
  EXPECT_FALSE(report.warnings.empty());
  EXPECT_EQ(model.classes[0].descriptors.size(), 2u);
}

TEST(Train, OneClassIsRejected) {
  SynthData data = synth_classes(small_world(2, 2, 40));
  for (auto& instance : data.instances) instance.label = 1;
  EXPECT_THROW(train_on(data), Error);
}

TEST(Recognizer, SingleActionStream) {
  const SynthData data = synth_classes(small_world(3, 4, 60));
  const auto model = train_on(data);
  SynthConfig longer = small_world(3, 1, 240);
  longer.idle_fraction = 0.0;
  const auto stream = synth_more_instances(longer, 1, 99);
  const auto events = recognize_stream(model, stream[1].frames);
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front().kind, EventKind::initial_decision);
  EXPECT_EQ(events.front().frame_index, 29u);
  int initial = 0;
  int boundaries = 0;
  for (const auto& e : events) {
    initial += e.kind == EventKind::initial_decision;
    boundaries += e.kind == EventKind::boundary;
    EXPECT_EQ(e.label, events.front().label);
  }
  EXPECT_EQ(initial, 1);
  EXPECT_EQ(boundaries, 0);
}

TEST(Recognizer, ReplayedTrainingInstance) {
  const SynthData data = synth_classes(small_world(3, 3, 60));
  const auto model = train_on(data);
  for (const auto& instance : data.instances) {
    const auto events = recognize_stream(model, instance.frames);
    ASSERT_FALSE(events.empty());
    EXPECT_EQ(events.front().label, instance.label);
  }
}

TEST(Recognizer, BoundaryAfterClassSwitch) {
  SynthConfig config = small_world(2, 4, 80);
  config.separation_floor = 2.0;
  const SynthData data = synth_classes(config);
  const auto model = train_on(data);
  const auto fresh = synth_more_instances(config, 1, 5);
  std::vector<SkeletonFrame> frames = fresh[0].frames;
  const std::size_t switch_at = frames.size();
  frames.insert(frames.end(), fresh[1].frames.begin(), fresh[1].frames.end());

  const auto events = recognize_stream(model, frames);
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front().label, 1);
  std::vector<RecognitionEvent> boundaries;
  for (const auto& e : events) {
    if (e.kind == EventKind::boundary) boundaries.push_back(e);
  }
  ASSERT_EQ(boundaries.size(), 1u);
  EXPECT_EQ(boundaries[0].label, 2);
  EXPECT_GT(boundaries[0].frame_index, switch_at);
  EXPECT_LT(boundaries[0].frame_index, switch_at + 60);
  EXPECT_EQ(events.back().label, 2);
}

TEST(Recognizer, DropsIncompleteFrames) {
  const SynthData data = synth_classes(small_world(2, 2, 60));
  const auto model = train_on(data);
  Recognizer recognizer(model);
  std::vector<SkeletonFrame> frames = data.instances[0].frames;
  frames[40].joints(2, 4) = NAN;
  std::size_t events = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto e = recognizer.step(frames[i]);
    if (i == 40) {
      EXPECT_FALSE(e.has_value());
    }
    events += e.has_value();
  }
  EXPECT_EQ(recognizer.dropped_frames(), 1u);
  EXPECT_EQ(recognizer.frame_index(), 60u);
  EXPECT_EQ(events, 60u - 29u - 1u);
  EXPECT_EQ(recognizer.covariance()->frame_count(), 59u);
}

TEST(Recognizer, ShortStreamMakesNoDecision) {
  const SynthData data = synth_classes(small_world(2, 2, 60));
  const auto model = train_on(data);
  const std::vector<SkeletonFrame> frames(data.instances[0].frames.begin(),
                                          data.instances[0].frames.begin() + 20);
  EXPECT_TRUE(recognize_stream(model, frames).empty());
}

TEST(Recognizer, ResetRestartsStatistics) {
  SynthConfig config = small_world(2, 4, 80);
  config.separation_floor = 2.0;
  const SynthData data = synth_classes(config);
  RecognizerConfig rc;
  rc.reset_on_boundary = true;
  const auto model = train_on(data, rc);
  const auto fresh = synth_more_instances(config, 1, 5);
  Recognizer recognizer(model);
  std::optional<std::size_t> boundary_at;
  std::size_t index = 0;
  for (const auto* instance : {&fresh[0], &fresh[1]}) {
    for (const auto& frame : instance->frames) {
      const auto e = recognizer.step(frame);
      if (e && e->kind == EventKind::boundary && !boundary_at) {
        boundary_at = index;
        EXPECT_FALSE(recognizer.covariance().has_value());
      }
      ++index;
    }
  }
  ASSERT_TRUE(boundary_at.has_value());
  if (index - *boundary_at >= model->config.init_frames) {
    ASSERT_TRUE(recognizer.covariance().has_value());
    EXPECT_EQ(recognizer.covariance()->frame_count(), index - *boundary_at);
  }
}

TEST(EventKind, RoundTrip) {
  for (auto k : {EventKind::initial_decision, EventKind::continuation, EventKind::boundary}) {
    EXPECT_EQ(event_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(event_kind_from_string("nope"), Error);
}
