#include "swf/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace swf {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 k = skew(theta);
  if (angle < kSmallAngle) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const Vec3 vee{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  const double s = 0.5 * vee.norm();
  const double angle = std::atan2(s, c);

  if (angle < kSmallAngle) {
    return 0.5 * vee;
  }
  if (std::numbers::pi - angle > 1e-3) {
    return vee * (angle / (2.0 * s));
  }

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part R + R^T = 2 cos(a) I + 2 (1 - cos(a)) n n^T.
  const Mat3 sym = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  int col = 0;
  sym.diagonal().maxCoeff(&col);
  Vec3 axis = sym.col(col) / std::sqrt(std::max(sym(col, col), 1e-300));
  axis.normalize();
  // vee = 2 sin(a) n fixes the sign.
  if (axis.dot(vee) < 0.0) axis = -axis;
  return axis * std::atan2(0.5 * vee.dot(axis), c);
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace swf
