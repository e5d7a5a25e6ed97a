#include "covact/covariance.hpp"

#include <cmath>
#include <string>

#include "covact/error.hpp"

namespace covact {

namespace {

void check_decay(double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) {
    throw usage_error("decay must lie in [0, 1], got " + std::to_string(decay));
  }
}

}  // namespace

double temporal_weight(double decay, std::size_t age) {
  check_decay(decay);
  return std::pow(decay, static_cast<double>(age));
}

void symmetrize(Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
  }
}

WeightedMoments batch_weighted_covariance(std::span<const WeightedFrame> frames,
                                          double decay) {
  check_decay(decay);
  const std::size_t t = frames.size();
  if (t < 2) throw data_error("insufficient frames");

  const Eigen::Index d = frames.front().feature.size();
  Eigen::VectorXd psi(static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < t; ++i) {
    const auto& f = frames[i];
    if (f.feature.size() != d) throw data_error("feature dimension mismatch");
    if (!(f.frame_weight > 0.0) || !std::isfinite(f.frame_weight)) {
      throw data_error("frame weight must be positive and finite");
    }
    if (!f.feature.allFinite()) throw numerical_error("numerical fault");
    psi(static_cast<Eigen::Index>(i)) = f.frame_weight * temporal_weight(decay, t - 1 - i);
  }

  WeightedMoments out;
  out.weight_sum = psi.sum();
  const Eigen::VectorXd normalized = psi / out.weight_sum;
  out.weight_sq_sum = normalized.squaredNorm();
  if (!(out.weight_sq_sum < 1.0)) throw numerical_error("degenerate weights");

  out.mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < t; ++i) {
    out.mean += normalized(static_cast<Eigen::Index>(i)) * frames[i].feature;
  }

  // Columns are sqrt(psi_i / weight_sum) * (f_i - mean), so cov = D D^T / (1 - w~^2).
  Eigen::MatrixXd centered(d, static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < t; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    centered.col(col) = std::sqrt(normalized(col)) * (frames[i].feature - out.mean);
  }
  out.cov.noalias() = centered * centered.transpose();
  out.cov /= (1.0 - out.weight_sq_sum);
  symmetrize(out.cov);
  return out;
}

WeightedCovarianceState WeightedCovarianceState::initialize(
    std::span<const WeightedFrame> frames, double decay) {
  WeightedMoments moments = batch_weighted_covariance(frames, decay);
  WeightedCovarianceState state;
  state.cov_ = std::move(moments.cov);
  state.mean_ = std::move(moments.mean);
  state.diff_.resize(state.mean_.size());
  state.weight_sum_ = moments.weight_sum;
  state.weight_sq_sum_ = moments.weight_sq_sum;
  state.decay_ = decay;
  state.frame_count_ = frames.size();
  return state;
}

void WeightedCovarianceState::update(const Eigen::Ref<const Eigen::VectorXd>& feature,
                                     double frame_weight) {
  if (feature.size() != mean_.size()) throw data_error("feature dimension mismatch");
  if (!std::isfinite(frame_weight) || !feature.allFinite()) {
    throw numerical_error("numerical fault");
  }
  if (frame_weight < kMinFrameWeight) {
    throw data_error("frame weight below the admissible floor");
  }

  const double xi = frame_weight;
  const double past = decay_ * weight_sum_;  // eta * w^_t
  const double spread = 1.0 - weight_sq_sum_;
  const double denom = 2.0 * past * xi + past * past * spread;
  if (!(denom > 0.0) || !std::isfinite(denom)) throw numerical_error("degenerate state");

  const double total = past + xi;
  const double cov_scale = past * spread * total / denom;
  const double rank_one_scale = past * (xi * xi + past * xi) / total / denom;

  diff_.noalias() = feature - mean_;
  cov_ *= cov_scale;
  cov_.noalias() += rank_one_scale * diff_ * diff_.transpose();
  symmetrize(cov_);

  mean_ = (past * mean_ + xi * feature) / total;
  weight_sq_sum_ = (past * past * weight_sq_sum_ + xi * xi) / (total * total);
  weight_sum_ = total;
  ++frame_count_;
}

WeightedCovarianceState initialize_state(std::span<const WeightedFrame> frames,
                                         double decay) {
  return WeightedCovarianceState::initialize(frames, decay);
}

WeightedCovarianceState incremental_update(WeightedCovarianceState state,
                                           const WeightedFrame& frame) {
  state.update(frame);
  return state;
}

}  // namespace covact
