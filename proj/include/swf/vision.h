#pragma once

#include <span>
#include <stdexcept>

#include "swf/state.h"

namespace swf {

/// Camera-from-IMU transform: p_C = rot * p_I + pos.
struct Extrinsics {
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
};

/// One normalized-coordinate observation of a feature from a clone.
struct Obs {
  int clone_index = 0;
  Vec2 uv = Vec2::Zero();
  double sigma = 1.0;  // normalized units
};

/// One landmark observation in a frame, keyed by landmark id.
struct FrameObs {
  int id = -1;
  Vec2 uv = Vec2::Zero();
};

inline constexpr double kMinDepth = 1e-3;

class BehindCamera : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class TriangulationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ProjectionFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Mat23 = Eigen::Matrix<double, 2, 3>;

Vec3 to_camera(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf);

Vec2 project(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf);
inline Vec2 project(const ClonePose& clone, const Extrinsics& ext, const Vec3& pf) {
  return project(clone.rot, clone.pos, ext, pf);
}

/// Derivatives of one projection w.r.t. the clone's local orientation error,
/// the clone position and the global feature position.
struct ObsJacobian {
  Mat23 d_theta;
  Mat23 d_pos;
  Mat23 d_feat;
};

ObsJacobian observation_jacobian(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf);

/// Stacked linear system r = hx * dx + hf * dpf + noise for one feature.
struct StackedJac {
  MatX hx;                              // rows x N
  Eigen::Matrix<double, Eigen::Dynamic, 3> hf;  // rows x 3
  VecX resid;
  VecX rdiag;  // measurement variances

  Eigen::Index rows() const { return resid.size(); }
};

/// Linearization point of one clone for the Jacobian (current or first estimate).
struct CloneLin {
  Mat3 rot;
  Vec3 pos;
};

/// Builds the stacked system over `layout`. `lin` gives the Jacobian
/// evaluation point of every clone, `lin_pf` that of the feature; residuals
/// always use the current estimates `clones` and `pf`.
StackedJac stack_feature(std::span<const ClonePose> clones, std::span<const CloneLin> lin, const Extrinsics& ext,
                         const Vec3& pf, const Vec3& lin_pf, std::span<const Obs> obs, const ErrorLayout& layout);

/// Linear intersection of bearing rays followed by a few Gauss-Newton steps
/// on reprojection error. Throws TriangulationFailed.
Vec3 triangulate(std::span<const ClonePose> clones, const Extrinsics& ext, std::span<const Obs> obs);

struct ProjectedSystem {
  MatX hx;
  VecX resid;
  VecX rdiag;
};

struct SplitSystem {
  ProjectedSystem sub1;  // 3 rows carrying the feature
  Eigen::Matrix3d hf1;   // invertible
  double hf1_cond = 0.0;
  ProjectedSystem sub2;  // feature-free rows
};

/// Rotates the system with Givens rotations so that hf becomes upper
/// triangular; returns both row groups. Needs 2n_obs > 3 and rank(hf) == 3.
SplitSystem split_subsystems(const StackedJac& j);

/// Feature-free part of split_subsystems.
ProjectedSystem nullspace_project(const StackedJac& j);

}  // namespace swf
