#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "swf/geometry.h"

namespace swf {

/// Thrown when a caller hands an operation inputs that violate its contract
/// (dimension or layout mismatch, misuse of a mode-specific routine).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ImuState {
  Mat3 rot = Mat3::Identity();  // global <- imu
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
};

struct ClonePose {
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  double stamp = 0.0;
  // First-estimate anchors, written once at cloning time.
  std::optional<Mat3> first_rot;
  std::optional<Vec3> first_pos;
};

struct FeatureState {
  Vec3 pos = Vec3::Zero();
  int id = -1;
  std::optional<Vec3> first_pos;
};

/// Error-state index ranges. Order: [theta p v bg ba | clones (theta p) | features].
struct ErrorLayout {
  static constexpr int kTheta = 0;
  static constexpr int kPos = 3;
  static constexpr int kVel = 6;
  static constexpr int kBg = 9;
  static constexpr int kBa = 12;
  static constexpr int kImuDim = 15;
  static constexpr int kCloneDim = 6;
  static constexpr int kFeatureDim = 3;

  int num_clones = 0;
  int num_features = 0;

  int dim() const { return kImuDim + kCloneDim * num_clones + kFeatureDim * num_features; }
  int clone_theta(int i) const { return kImuDim + kCloneDim * i; }
  int clone_pos(int i) const { return clone_theta(i) + 3; }
  int feature(int j) const { return kImuDim + kCloneDim * num_clones + kFeatureDim * j; }
  int features_begin() const { return feature(0); }
};

struct SwfState {
  ImuState imu;
  // First estimate of the current IMU block: the most recent prediction,
  // before any correction at that epoch.
  std::optional<ImuState> imu_first;
  std::vector<ClonePose> clones;  // oldest first
  std::vector<FeatureState> features;

  ErrorLayout layout() const {
    return ErrorLayout{static_cast<int>(clones.size()), static_cast<int>(features.size())};
  }
  int dim() const { return layout().dim(); }

  /// Index of the feature with this id, or -1.
  int find_feature(int id) const;
};

/// x (+) delta: rotations retracted on the right, everything else added.
SwfState boxplus(const SwfState& x, const VecX& delta);

/// Error vector with x = xhat (+) result. Layouts and feature ids must match.
VecX boxminus(const SwfState& x, const SwfState& xhat);

/// Log(R * Rhat^T) of the current IMU orientation; z is rotation about gravity.
Vec3 global_orientation_error(const SwfState& x, const SwfState& xhat);

/// Writes 0.5 (P + P^T) back into p.
void symmetrize(MatX& p);

}  // namespace swf
