#include "swf/propagation.h"

#include <string>

namespace swf {
namespace {

struct Deriv {
  Mat3 rot;
  Vec3 pos;
  Vec3 vel;
};

Deriv dynamics(const Mat3& rot, const Vec3& vel, const Vec3& omega, const Vec3& accel) {
  return {rot * skew(omega), vel, rot * accel + kGravity};
}

// One Bjorck iteration; RK4 leaves R orthonormal to ~1e-14 already.
Mat3 reorthonormalize(const Mat3& r) {
  return 0.5 * r * (3.0 * Mat3::Identity() - r.transpose() * r);
}

ImuState rk4(const ImuState& imu, const Vec3& w0, const Vec3& a0, const Vec3& w1, const Vec3& a1, double dt) {
  const Vec3 wm = 0.5 * (w0 + w1);
  const Vec3 am = 0.5 * (a0 + a1);
  const double h = 0.5 * dt;

  const Deriv k1 = dynamics(imu.rot, imu.vel, w0, a0);
  const Deriv k2 = dynamics(imu.rot + h * k1.rot, imu.vel + h * k1.vel, wm, am);
  const Deriv k3 = dynamics(imu.rot + h * k2.rot, imu.vel + h * k2.vel, wm, am);
  const Deriv k4 = dynamics(imu.rot + dt * k3.rot, imu.vel + dt * k3.vel, w1, a1);

  ImuState out = imu;
  out.rot = reorthonormalize(imu.rot + dt / 6.0 * (k1.rot + 2.0 * k2.rot + 2.0 * k3.rot + k4.rot));
  out.pos = imu.pos + dt / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
  out.vel = imu.vel + dt / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel);
  return out;
}

void check_sample(const ImuSample& s) {
  if (!s.omega_m.allFinite() || !s.accel_m.allFinite() || !std::isfinite(s.stamp)) {
    throw PropagationError("non-finite IMU sample at t=" + std::to_string(s.stamp));
  }
}

}  // namespace

ImuState integrate_step(const ImuState& imu, const ImuSample& s0, const ImuSample& s1) {
  check_sample(s0);
  check_sample(s1);
  const double dt = s1.stamp - s0.stamp;
  if (!(dt > 0.0)) {
    throw PropagationError("IMU stamps not increasing at t=" + std::to_string(s1.stamp));
  }
  return rk4(imu, s0.omega_m - imu.bg, s0.accel_m - imu.ba, s1.omega_m - imu.bg, s1.accel_m - imu.ba, dt);
}

ImuState integrate_mean(const ImuState& imu, const ImuSample& sample, double dt) {
  check_sample(sample);
  if (!(dt > 0.0)) throw PropagationError("integrate_mean: dt must be positive");
  const Vec3 w = sample.omega_m - imu.bg;
  const Vec3 a = sample.accel_m - imu.ba;
  return rk4(imu, w, a, w, a, dt);
}

ImuState integrate_mean(const ImuState& imu, std::span<const ImuSample> samples) {
  if (samples.size() < 2) throw PropagationError("integrate_mean: need at least two samples");
  ImuState cur = imu;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    cur = integrate_step(cur, samples[i], samples[i + 1]);
  }
  return cur;
}

Mat15 state_transition(const ImuState& prev, const ImuState& next, std::span<const ImuSample> samples) {
  if (samples.size() < 2) throw PropagationError("state_transition: need at least two samples");
  const double dt = samples.back().stamp - samples.front().stamp;

  Mat15 phi = Mat15::Identity();
  const Mat3& r0 = prev.rot;
  const Vec3 dp = r0.transpose() * (next.pos - prev.pos - prev.vel * dt - 0.5 * kGravity * dt * dt);
  const Vec3 dv = r0.transpose() * (next.vel - prev.vel - kGravity * dt);
  phi.block<3, 3>(0, 0) = next.rot.transpose() * r0;
  phi.block<3, 3>(3, 0) = -r0 * skew(dp);
  phi.block<3, 3>(3, 6) = Mat3::Identity() * dt;
  phi.block<3, 3>(6, 0) = -r0 * skew(dv);

  // Bias columns by central differences. Position and velocity enter the
  // bias response only additively, so start from the origin to keep the
  // differences well scaled.
  ImuState base = prev;
  base.pos.setZero();
  base.vel.setZero();
  const ImuState nominal = integrate_mean(base, samples);
  constexpr double kEps = 1e-6;
  for (int col = 0; col < 6; ++col) {
    ImuState plus = base;
    ImuState minus = base;
    Vec3& bp = col < 3 ? plus.bg : plus.ba;
    Vec3& bm = col < 3 ? minus.bg : minus.ba;
    bp[col % 3] += kEps;
    bm[col % 3] -= kEps;
    const ImuState fp = integrate_mean(plus, samples);
    const ImuState fm = integrate_mean(minus, samples);
    const int c = ErrorLayout::kBg + col;
    phi.block<3, 1>(0, c) = (log_so3(nominal.rot.transpose() * fp.rot) - log_so3(nominal.rot.transpose() * fm.rot)) /
                            (2.0 * kEps);
    phi.block<3, 1>(3, c) = (fp.pos - fm.pos) / (2.0 * kEps);
    phi.block<3, 1>(6, c) = (fp.vel - fm.vel) / (2.0 * kEps);
  }
  return phi;
}

Mat15 discrete_noise(const ImuState& prev, const NoiseParams& noise, double dt) {
  Eigen::Matrix<double, 15, 12> g = Eigen::Matrix<double, 15, 12>::Zero();
  g.block<3, 3>(ErrorLayout::kTheta, 0) = -Mat3::Identity();
  g.block<3, 3>(ErrorLayout::kVel, 3) = -prev.rot;
  g.block<3, 3>(ErrorLayout::kBg, 6) = Mat3::Identity();
  g.block<3, 3>(ErrorLayout::kBa, 9) = Mat3::Identity();
  Eigen::Matrix<double, 12, 1> var;
  var << Vec3::Constant(noise.sigma_g * noise.sigma_g), Vec3::Constant(noise.sigma_a * noise.sigma_a),
      Vec3::Constant(noise.sigma_wg * noise.sigma_wg), Vec3::Constant(noise.sigma_wa * noise.sigma_wa);
  Mat15 q = g * var.asDiagonal() * g.transpose() * dt;
  return 0.5 * (q + q.transpose());
}

PropResult propagate_imu(const ImuState& imu, std::span<const ImuSample> samples, const NoiseParams& noise,
                         const ImuState* lin_prev) {
  if (samples.size() < 2) throw PropagationError("propagate_imu: need at least two samples");
  PropResult out;
  ImuState cur = imu;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto pair = samples.subspan(i, 2);
    const ImuState next = integrate_step(cur, pair[0], pair[1]);
    const ImuState& lin = (i == 0 && lin_prev != nullptr) ? *lin_prev : cur;
    const Mat15 phi = state_transition(lin, next, pair);
    const Mat15 q = discrete_noise(cur, noise, pair[1].stamp - pair[0].stamp);
    out.phi = phi * out.phi;
    out.qd = phi * out.qd * phi.transpose() + q;
    cur = next;
  }
  out.qd = 0.5 * (out.qd + out.qd.transpose());
  out.imu_next = cur;
  return out;
}

void propagate_cov(MatX& p, const Mat15& phi, const Mat15& qd) {
  const Eigen::Index n = p.rows();
  if (p.cols() != n || n < 15) throw InvalidInput("propagate_cov: covariance must be square with N >= 15");
  const Eigen::Index rest = n - 15;
  Mat15 pii = phi * p.topLeftCorner<15, 15>() * phi.transpose() + qd;
  p.topLeftCorner<15, 15>() = 0.5 * (pii + pii.transpose());
  if (rest > 0) {
    MatX cross = phi * p.topRightCorner(15, rest);
    p.topRightCorner(15, rest) = cross;
    p.bottomLeftCorner(rest, 15) = cross.transpose();
  }
}

}  // namespace swf
