#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace covact {

/// Smallest admissible frame weight. Frames at the neutral pose would
/// otherwise carry zero weight.
inline constexpr double kMinFrameWeight = 1e-3;

/// Decay of the running statistics used when nothing else is configured.
inline constexpr double kDefaultDecay = 0.95;

/// A feature vector together with its (time independent) frame weight.
struct WeightedFrame {
  Eigen::VectorXd feature;
  double frame_weight = 1.0;
};

/// Temporal weight of a frame `age` steps in the past: decay^age.
double temporal_weight(double decay, std::size_t age);

/// Weighted first and second moments computed directly from their
/// definitions. Used for initialization and as the reference the
/// incremental rule is checked against.
struct WeightedMoments {
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean;
  double weight_sum = 0.0;     // sum of combined weights
  double weight_sq_sum = 0.0;  // sum of squared normalized weights
};

/// Direct evaluation over all frames; the combined weight of frame i (of t)
/// is frame_weight_i * decay^(t-1-i).
///
/// Throws Error(data, "insufficient frames") for fewer than two frames and
/// Error(numerical, "degenerate weights") when a single frame carries all
/// of the weight.
WeightedMoments batch_weighted_covariance(std::span<const WeightedFrame> frames,
                                          double decay);

/// Running weighted covariance descriptor with exponential forgetting.
///
/// Each update is O(d^2) and only touches the stored statistics; no frame
/// history is kept. The state is a plain value and may be copied or moved
/// across threads; updates of a single state must be sequential.
class WeightedCovarianceState {
 public:
  /// Batch-initializes from the first frames of a stream (at least two).
  static WeightedCovarianceState initialize(std::span<const WeightedFrame> frames,
                                            double decay);

  /// Folds one more frame into the statistics.
  void update(const Eigen::Ref<const Eigen::VectorXd>& feature, double frame_weight);
  void update(const WeightedFrame& frame) { update(frame.feature, frame.frame_weight); }

  const Eigen::MatrixXd& cov() const noexcept { return cov_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  double weight_sum() const noexcept { return weight_sum_; }
  double weight_sq_sum() const noexcept { return weight_sq_sum_; }
  double decay() const noexcept { return decay_; }
  std::size_t frame_count() const noexcept { return frame_count_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

 private:
  WeightedCovarianceState() = default;

  Eigen::MatrixXd cov_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd diff_;  // scratch, avoids a per-update allocation
  double weight_sum_ = 0.0;
  double weight_sq_sum_ = 0.0;
  double decay_ = kDefaultDecay;
  std::size_t frame_count_ = 0;
};

WeightedCovarianceState initialize_state(std::span<const WeightedFrame> frames,
                                         double decay);

WeightedCovarianceState incremental_update(WeightedCovarianceState state,
                                           const WeightedFrame& frame);

/// Makes `m` exactly symmetric by averaging it with its transpose.
void symmetrize(Eigen::MatrixXd& m);

}  // namespace covact
