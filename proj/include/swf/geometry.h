#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

namespace swf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Gravity in the global frame, m/s^2 (z up).
inline const Vec3 kGravity{0.0, 0.0, -9.81};

/// Angles below this norm use the Taylor branch in exp/log.
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& v);

/// Rodrigues formula. exp_so3(0) == I.
Mat3 exp_so3(const Vec3& theta);

/// Principal logarithm, |result| <= pi.
Vec3 log_so3(const Mat3& r);

/// True when r is orthonormal with det +1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-10);

/// Projects a nearly orthonormal matrix back onto SO(3).
Mat3 orthonormalize(const Mat3& r);

}  // namespace swf
