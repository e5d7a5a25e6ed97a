#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace covact {

/// Joint ordering of a skeleton stream and the indices of the three joints
/// used for normalization.
struct JointLayout {
  std::size_t hip_center = 0;
  std::size_t shoulder_center = 0;
  std::size_t spine = 0;
  std::vector<std::string> names;

  std::size_t joint_count() const noexcept { return names.size(); }
  /// Length of the normalized feature vector, 3 * (K - 1).
  std::size_t feature_dim() const noexcept { return 3 * (names.size() - 1); }

  /// Throws Error(data, ...) unless K >= 4 and the reference joints are
  /// distinct valid indices.
  void validate() const;

  /// Kinect v1 layout with twenty joints.
  static JointLayout kinect_v1_20();
  /// Kinect v2 layout with twenty-five joints.
  static JointLayout kinect_v2_25();
  /// K joints with hip at 0, spine at 1, shoulder center at 2 and generic
  /// names for the rest.
  static JointLayout generic(std::size_t joint_count);

  friend bool operator==(const JointLayout&, const JointLayout&) = default;
};

struct SkeletonFrame {
  Eigen::Matrix3Xd joints;  // one column per joint, sensor units
  std::optional<double> timestamp;

  bool is_complete() const { return joints.size() > 0 && joints.allFinite(); }
};

/// Reference stance whose distance to a frame measures how informative
/// that frame is. Stored in normalized feature coordinates.
struct NeutralPose {
  Eigen::VectorXd features;
};

/// Distance between shoulder center and spine below which a frame cannot
/// be normalized.
inline constexpr double kMinSkeletonScale = 1e-6;

/// Hip-centered coordinates of every joint but the hip, divided by the
/// shoulder-center/spine distance, flattened in layout order.
///
/// Throws Error(data, "degenerate skeleton") for a vanishing scale and
/// Error(data, ...) for a joint count mismatch or non-finite coordinates.
Eigen::VectorXd normalize_skeleton(const SkeletonFrame& frame, const JointLayout& layout);

NeutralPose neutral_from_frame(const SkeletonFrame& frame, const JointLayout& layout);

/// Mean Euclidean distance of each joint to its neutral position, floored
/// at kMinFrameWeight.
double frame_weight(const Eigen::VectorXd& features, const NeutralPose& neutral);

/// The same mean distance without the floor.
double raw_frame_weight(const Eigen::VectorXd& features, const NeutralPose& neutral);

}  // namespace covact
