#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "swf/propagation.h"
#include "swf/vision.h"

namespace swf {

/// Camera z along body x, 5 cm lever arm.
Extrinsics default_extrinsics();

struct SimConfig {
  double duration = 60.0;  // s
  int imu_hz = 200;
  int cam_hz = 10;

  // p(t) = center + amp * sin(2 pi freq t + phase), per axis
  Vec3 center = Vec3::Zero();
  Vec3 amp{4.0, 3.0, 2.0};
  Vec3 freq{0.1, 0.07, 0.05};
  Vec3 phase{0.0, 1.0, 2.0};
  // roll / pitch / yaw = offset + amp * sin(2 pi freq t + phase)
  Vec3 euler_offset = Vec3::Zero();
  Vec3 euler_amp{0.15, 0.15, 0.4};
  Vec3 euler_freq{0.1, 0.08, 0.05};
  Vec3 euler_phase{0.5, 1.5, 0.0};

  NoiseParams noise;
  double noise_scale = 1.0;  // 0 gives noiseless IMU
  Vec3 bg0 = Vec3::Constant(0.002);
  Vec3 ba0 = Vec3::Constant(0.02);
  bool bias_walk = true;

  double focal = 458.0;
  double width = 720.0;
  double height = 480.0;
  double pixel_sigma_px = 2.0;

  int num_landmarks = 3000;
  double min_range = 1.0;  // distance from the trajectory envelope
  double max_range = 10.0;

  Extrinsics ext = default_extrinsics();

  double pixel_sigma() const { return pixel_sigma_px / focal; }
  int num_imu() const { return static_cast<int>(duration * imu_hz); }
  int imu_per_frame() const { return imu_hz / cam_hz; }
  /// Throws InvalidInput on inconsistent rates or ranges.
  void validate() const;
};

struct TruthSample {
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();
  Vec3 accel_body = Vec3::Zero();  // specific force
};

/// Closed-form trajectory. Throws InvalidInput for t outside [0, duration].
TruthSample truth_at(const SimConfig& cfg, double t);

struct ImuStream {
  std::vector<ImuSample> samples;
  std::vector<Vec3> bg;  // true biases per sample
  std::vector<Vec3> ba;
};

/// stamps k / imu_hz for k in [0, duration * imu_hz).
ImuStream gen_imu(const SimConfig& cfg, std::uint64_t seed);

/// Uniform points whose distance to the trajectory bounding box lies in
/// [min_range, max_range].
std::vector<Vec3> gen_landmarks(const SimConfig& cfg, std::uint64_t seed);

/// Visible landmarks at time t (in front, inside the image), with pixel noise.
std::vector<FrameObs> gen_frame(const SimConfig& cfg, double t, const std::vector<Vec3>& landmarks,
                                std::uint64_t seed);

/// Axis-aligned bounds of the position trajectory.
void trajectory_bounds(const SimConfig& cfg, Vec3& lo, Vec3& hi);

/// True IMU state at sample k of a stream.
ImuState truth_imu(const SimConfig& cfg, const ImuStream& imu, int k);

struct PriorSigmas {
  double rot = 0.3 * std::numbers::pi / 180.0;
  double pos = 0.02;
  double vel = 0.02;
  double bg = 10.0 * 2.0e-5;
  double ba = 10.0 * 3.0e-3;
  double feat = 0.1;
};

/// truth (+) N(0, P0) with diagonal P0; `features` are added with their ids.
struct InitialPrior {
  SwfState x;
  MatX p;
};
InitialPrior make_prior(const ImuState& truth, const std::vector<std::pair<int, Vec3>>& features,
                        const PriorSigmas& sig, std::uint64_t seed);

/// Deterministic generator for one named stream of a run.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// Writes t, p, v, euler, omega, accel per IMU sample.
void dump_truth_csv(const SimConfig& cfg, const ImuStream& imu, const std::string& path);

}  // namespace swf
