#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "covact/covariance.hpp"
#include "covact/error.hpp"
#include "oracles.hpp"

using namespace covact;

namespace {

std::vector<WeightedFrame> scalar_frames(std::initializer_list<double> values) {
  std::vector<WeightedFrame> frames;
  for (double v : values) frames.push_back({Eigen::VectorXd::Constant(1, v), 1.0});
  return frames;
}

std::vector<WeightedFrame> random_frames(std::mt19937_64& rng, int count, int d) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> xi(0.1, 1.0);
  std::vector<WeightedFrame> frames;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd f(d);
    for (int a = 0; a < d; ++a) f(a) = 0.5 * a + normal(rng);
    frames.push_back({f, xi(rng)});
  }
  return frames;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

}  // namespace

TEST(TemporalWeight, Values) {
  EXPECT_DOUBLE_EQ(temporal_weight(0.9, 0), 1.0);
  EXPECT_NEAR(temporal_weight(0.9, 2), 0.81, 1e-15);
  EXPECT_DOUBLE_EQ(temporal_weight(1.0, 12345), 1.0);
  EXPECT_EQ(kind_of([] { temporal_weight(1.5, 1); }), ErrorKind::usage);
}

TEST(BatchCovariance, TwoScalarFrames) {
  const auto frames = scalar_frames({0.0, 2.0});
  const auto m = batch_weighted_covariance(frames, 1.0);
  EXPECT_DOUBLE_EQ(m.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(m.weight_sum, 2.0);
  EXPECT_DOUBLE_EQ(m.weight_sq_sum, 0.5);
  EXPECT_DOUBLE_EQ(m.cov(0, 0), 2.0);
}

TEST(BatchCovariance, ThreeScalarFrames) {
  const auto m = batch_weighted_covariance(scalar_frames({0.0, 2.0, 4.0}), 1.0);
  EXPECT_NEAR(m.mean(0), 2.0, 1e-15);
  EXPECT_NEAR(m.cov(0, 0), 4.0, 1e-14);
}

TEST(BatchCovariance, ConstantFramesHaveZeroCovariance) {
  std::vector<WeightedFrame> frames(7, {Eigen::Vector3d(1.5, -2.0, 0.25), 0.4});
  const auto m = batch_weighted_covariance(frames, 0.9);
  EXPECT_TRUE(m.cov.isZero(1e-14));
  EXPECT_TRUE(m.mean.isApprox(Eigen::Vector3d(1.5, -2.0, 0.25)));
}

TEST(BatchCovariance, MatchesDefinition) {
  std::mt19937_64 rng(3);
  const auto frames = random_frames(rng, 60, 4);
  const auto got = batch_weighted_covariance(frames, 0.93);
  const auto want = oracle::weighted_moments(frames, 0.93);
  EXPECT_LT(oracle::relative_error(got.cov, want.cov), 1e-12);
  EXPECT_LT(oracle::relative_error(got.mean, want.mean), 1e-12);
  EXPECT_NEAR(got.weight_sum, want.weight_sum, 1e-12);
  EXPECT_NEAR(got.weight_sq_sum, want.weight_sq_sum, 1e-14);
}

TEST(BatchCovariance, RejectsShortInput) {
  EXPECT_EQ(kind_of([] { batch_weighted_covariance(scalar_frames({1.0}), 0.9); }), ErrorKind::data);
}

TEST(BatchCovariance, ZeroDecayIsDegenerate) {
  EXPECT_EQ(kind_of([] { batch_weighted_covariance(scalar_frames({1.0, 2.0, 3.0}), 0.0); }),
            ErrorKind::numerical);
}

TEST(CovarianceState, InitializeKeepsFrameCount) {
  std::mt19937_64 rng(5);
  const auto frames = random_frames(rng, 30, 6);
  const auto state = WeightedCovarianceState::initialize(frames, 0.95);
  EXPECT_EQ(state.frame_count(), 30u);
  EXPECT_EQ(state.dim(), 6);
  const auto two = WeightedCovarianceState::initialize(std::span(frames).first(2), 0.95);
  EXPECT_EQ(two.frame_count(), 2u);
  EXPECT_EQ(kind_of([&] { WeightedCovarianceState::initialize(std::span(frames).first(1), 0.95); }),
            ErrorKind::data);
}

TEST(CovarianceState, UpdateOnScalarExample) {
  auto state = WeightedCovarianceState::initialize(scalar_frames({0.0, 2.0}), 1.0);
  state.update(Eigen::VectorXd::Constant(1, 4.0), 1.0);
  EXPECT_NEAR(state.cov()(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(state.mean()(0), 2.0, 1e-15);
  EXPECT_EQ(state.frame_count(), 3u);
}

TEST(CovarianceState, FrameAtMeanLeavesMeanUnchanged) {
  std::mt19937_64 rng(9);
  auto state = WeightedCovarianceState::initialize(random_frames(rng, 10, 3), 0.9);
  const Eigen::VectorXd mean = state.mean();
  state.update(mean, 0.7);
  EXPECT_TRUE(state.mean().isApprox(mean, 1e-14));
}

TEST(CovarianceState, UnweightedClosedForm) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::vector<WeightedFrame> frames;
  for (int i = 0; i < 40; ++i) frames.push_back({Eigen::Vector2d(normal(rng), normal(rng)), 1.0});
  auto state = WeightedCovarianceState::initialize(std::span(frames).first(2), 1.0);
  Eigen::MatrixXd c = state.cov();
  Eigen::VectorXd mu = state.mean();
  for (std::size_t t = 2; t < frames.size(); ++t) {
    const Eigen::VectorXd d = frames[t].feature - mu;
    const double n = static_cast<double>(t);
    c = (n - 1.0) / n * c + d * d.transpose() / (n + 1.0);
    mu += d / (n + 1.0);
    state.update(frames[t]);
    EXPECT_LT((state.cov() - c).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((state.mean() - mu).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CovarianceState, IncrementalMatchesDefinition) {
  std::mt19937_64 rng(13);
  for (double eta : {0.8, 0.95, 1.0}) {
    const auto frames = random_frames(rng, 200, 5);
    auto state = WeightedCovarianceState::initialize(std::span(frames).first(30), eta);
    for (std::size_t t = 30; t < frames.size(); ++t) state.update(frames[t]);
    const auto want = oracle::weighted_moments(frames, eta);
    EXPECT_LT(oracle::relative_error(state.cov(), want.cov), 1e-10);
    EXPECT_LT(oracle::relative_error(state.mean(), want.mean), 1e-10);
    EXPECT_NEAR(state.weight_sq_sum(), want.weight_sq_sum, 1e-13);
  }
}

TEST(CovarianceState, StaysSymmetric) {
  std::mt19937_64 rng(17);
  const auto frames = random_frames(rng, 500, 8);
  auto state = WeightedCovarianceState::initialize(std::span(frames).first(2), 0.95);
  for (std::size_t t = 2; t < frames.size(); ++t) state.update(frames[t]);
  EXPECT_EQ(state.cov(), state.cov().transpose());
}

TEST(CovarianceState, RejectsBadFrames) {
  std::mt19937_64 rng(19);
  auto state = WeightedCovarianceState::initialize(random_frames(rng, 5, 2), 0.9);
  EXPECT_EQ(kind_of([&] { state.update(Eigen::Vector2d(NAN, 0.0), 1.0); }), ErrorKind::numerical);
  EXPECT_EQ(kind_of([&] { state.update(Eigen::Vector2d(0.0, 0.0), 1e-4); }), ErrorKind::data);
  EXPECT_EQ(kind_of([&] { state.update(Eigen::Vector3d(0.0, 0.0, 0.0), 1.0); }), ErrorKind::data);
  EXPECT_EQ(state.frame_count(), 5u);
}

TEST(CovarianceState, FreeFunctionLeavesInputUntouched) {
  std::mt19937_64 rng(23);
  const auto frames = random_frames(rng, 6, 2);
  const auto state = initialize_state(std::span(frames).first(5), 0.9);
  const auto next = incremental_update(state, frames[5]);
  EXPECT_EQ(state.frame_count(), 5u);
  EXPECT_EQ(next.frame_count(), 6u);
}
