#include "covact/skeleton.hpp"

#include <algorithm>
#include <string>

#include "covact/covariance.hpp"
#include "covact/error.hpp"

namespace covact {

void JointLayout::validate() const {
  const std::size_t k = joint_count();
  if (k < 4) throw data_error("a skeleton needs at least four joints");
  if (hip_center >= k || shoulder_center >= k || spine >= k) {
    throw data_error("reference joint index out of range");
  }
  if (hip_center == shoulder_center || hip_center == spine || shoulder_center == spine) {
    throw data_error("reference joints must be distinct");
  }
}

JointLayout JointLayout::kinect_v1_20() {
  return {0, 2, 1,
          {"HipCenter", "Spine", "ShoulderCenter", "Head", "ShoulderLeft", "ElbowLeft",
           "WristLeft", "HandLeft", "ShoulderRight", "ElbowRight", "WristRight", "HandRight",
           "HipLeft", "KneeLeft", "AnkleLeft", "FootLeft", "HipRight", "KneeRight",
           "AnkleRight", "FootRight"}};
}

JointLayout JointLayout::kinect_v2_25() {
  return {0, 20, 1,
          {"SpineBase", "SpineMid", "Neck", "Head", "ShoulderLeft", "ElbowLeft",
           "WristLeft", "HandLeft", "ShoulderRight", "ElbowRight", "WristRight",
           "HandRight", "HipLeft", "KneeLeft", "AnkleLeft", "FootLeft", "HipRight",
           "KneeRight", "AnkleRight", "FootRight", "SpineShoulder", "HandTipLeft",
           "ThumbLeft", "HandTipRight", "ThumbRight"}};
}

JointLayout JointLayout::generic(std::size_t joint_count) {
  JointLayout layout{0, 2, 1, {}};
  layout.names.reserve(joint_count);
  for (std::size_t i = 0; i < joint_count; ++i) {
    switch (i) {
      case 0: layout.names.emplace_back("HipCenter"); break;
      case 1: layout.names.emplace_back("Spine"); break;
      case 2: layout.names.emplace_back("ShoulderCenter"); break;
      default: layout.names.push_back("Joint" + std::to_string(i)); break;
    }
  }
  layout.validate();
  return layout;
}

Eigen::VectorXd normalize_skeleton(const SkeletonFrame& frame, const JointLayout& layout) {
  const auto k = static_cast<Eigen::Index>(layout.joint_count());
  if (frame.joints.cols() != k) throw data_error("joint count does not match the layout");
  if (!frame.joints.allFinite()) throw data_error("non-finite joint coordinates");

  const auto hip = static_cast<Eigen::Index>(layout.hip_center);
  const Eigen::Vector3d origin = frame.joints.col(hip);
  const double scale = (frame.joints.col(static_cast<Eigen::Index>(layout.shoulder_center)) -
                        frame.joints.col(static_cast<Eigen::Index>(layout.spine)))
                           .norm();
  if (!(scale >= kMinSkeletonScale)) throw data_error("degenerate skeleton");

  Eigen::VectorXd out(3 * (k - 1));
  Eigen::Index slot = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (j == hip) continue;
    out.segment<3>(3 * slot) = (frame.joints.col(j) - origin) / scale;
    ++slot;
  }
  return out;
}

NeutralPose neutral_from_frame(const SkeletonFrame& frame, const JointLayout& layout) {
  return {normalize_skeleton(frame, layout)};
}

double raw_frame_weight(const Eigen::VectorXd& features, const NeutralPose& neutral) {
  if (features.size() != neutral.features.size() || features.size() % 3 != 0 ||
      features.size() == 0) {
    throw data_error("feature dimension does not match the neutral pose");
  }
  const Eigen::Index joints = features.size() / 3;
  double total = 0.0;
  for (Eigen::Index j = 0; j < joints; ++j) {
    total += (features.segment<3>(3 * j) - neutral.features.segment<3>(3 * j)).norm();
  }
  return total / static_cast<double>(joints);
}

double frame_weight(const Eigen::VectorXd& features, const NeutralPose& neutral) {
  return std::max(raw_frame_weight(features, neutral), kMinFrameWeight);
}

}  // namespace covact
