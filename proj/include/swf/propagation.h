#pragma once

#include <span>
#include <stdexcept>

#include "swf/state.h"

namespace swf {

using Mat15 = Eigen::Matrix<double, 15, 15>;

struct ImuSample {
  Vec3 omega_m = Vec3::Zero();  // rad/s
  Vec3 accel_m = Vec3::Zero();  // m/s^2, specific force in the body frame
  double stamp = 0.0;
};

/// Continuous-time noise densities. Defaults are the simulator's nominal sensor.
struct NoiseParams {
  double sigma_g = 1.70e-4;   // rad/s/sqrt(Hz)
  double sigma_a = 2.00e-3;   // m/s^2/sqrt(Hz)
  double sigma_wg = 2.00e-5;  // rad/s^2/sqrt(Hz)
  double sigma_wa = 3.00e-3;  // m/s^3/sqrt(Hz)

  NoiseParams scaled(double k) const { return {sigma_g * k, sigma_a * k, sigma_wg * k, sigma_wa * k}; }
};

struct PropResult {
  ImuState imu_next;
  Mat15 phi = Mat15::Identity();
  Mat15 qd = Mat15::Zero();
};

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One RK4 step over [s0.stamp, s1.stamp]; the inputs are interpolated
/// linearly between the two samples. Biases are held constant.
ImuState integrate_step(const ImuState& imu, const ImuSample& s0, const ImuSample& s1);

/// Constant-input integration over dt.
ImuState integrate_mean(const ImuState& imu, const ImuSample& sample, double dt);

/// Integrates across consecutive sample pairs. Needs at least two samples
/// with strictly increasing stamps.
ImuState integrate_mean(const ImuState& imu, std::span<const ImuSample> samples);

/// Error-state transition of the IMU block between two estimates.
///
/// The theta/p/v block is closed form in the endpoints, so Phi maps the
/// unobservable basis at prev exactly onto the basis at next. The bias columns
/// come from central differences of the integrator over `samples`, started at
/// `prev`.
Mat15 state_transition(const ImuState& prev, const ImuState& next, std::span<const ImuSample> samples);

/// First-order discrete noise G diag(sigma^2) G^T dt.
Mat15 discrete_noise(const ImuState& prev, const NoiseParams& noise, double dt);

/// Runs the mean integration and accumulates Phi and Qd step by step.
/// When `lin_prev` is given it replaces the starting point of the first
/// Phi evaluation (first-estimate Jacobians).
PropResult propagate_imu(const ImuState& imu, std::span<const ImuSample> samples, const NoiseParams& noise,
                         const ImuState* lin_prev = nullptr);

/// P <- Phi_full P Phi_full^T + Q_full where Phi_full is identity outside the
/// leading 15x15 block. In place; the result is re-symmetrized.
void propagate_cov(MatX& p, const Mat15& phi, const Mat15& qd);

}  // namespace swf
