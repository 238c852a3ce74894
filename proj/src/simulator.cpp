#include "swf/simulator.h"

#include <cmath>
#include <fstream>
#include <numbers>

namespace swf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

// value, first and second derivative of off + a sin(w t + ph), per component
void sinusoid(const Vec3& off, const Vec3& a, const Vec3& f, const Vec3& ph, double t, Vec3& x, Vec3& dx, Vec3& ddx) {
  for (int i = 0; i < 3; ++i) {
    const double w = kTwoPi * f[i];
    const double s = std::sin(w * t + ph[i]);
    const double c = std::cos(w * t + ph[i]);
    x[i] = off[i] + a[i] * s;
    dx[i] = a[i] * w * c;
    ddx[i] = -a[i] * w * w * s;
  }
}

}  // namespace

Extrinsics default_extrinsics() {
  Extrinsics e;
  // camera z = body x, camera x = -body y, camera y = -body z
  e.rot << 0, -1, 0,
           0, 0, -1,
           1, 0, 0;
  e.pos = Vec3(0.05, 0.0, 0.0);
  return e;
}

void SimConfig::validate() const {
  if (!(duration > 0.0) || imu_hz <= 0 || cam_hz <= 0) throw InvalidInput("sim: rates and duration must be positive");
  if (imu_hz % cam_hz != 0) throw InvalidInput("sim: imu_hz must be a multiple of cam_hz");
  if (!(min_range >= 0.0) || !(max_range > min_range)) throw InvalidInput("sim: landmark shell needs 0 <= min < max");
  if (num_landmarks < 0) throw InvalidInput("sim: negative landmark count");
  if (!(focal > 0.0) || !(width > 0.0) || !(height > 0.0)) throw InvalidInput("sim: bad camera intrinsics");
  if (!is_rotation(ext.rot, 1e-9)) throw InvalidInput("sim: extrinsic rotation invalid");
}

TruthSample truth_at(const SimConfig& cfg, double t) {
  if (t < -1e-12 || t > cfg.duration + 1e-9) throw InvalidInput("truth_at: t outside [0, duration]");
  TruthSample s;
  Vec3 acc;
  sinusoid(cfg.center, cfg.amp, cfg.freq, cfg.phase, t, s.pos, s.vel, acc);
  Vec3 e, de, dde;
  sinusoid(cfg.euler_offset, cfg.euler_amp, cfg.euler_freq, cfg.euler_phase, t, e, de, dde);
  const double roll = e[0], pitch = e[1], yaw = e[2];
  s.rot = rot_z(yaw) * rot_y(pitch) * rot_x(roll);
  const double sr = std::sin(roll), cr = std::cos(roll);
  const double sp = std::sin(pitch), cp = std::cos(pitch);
  s.omega_body = Vec3(de[0] - sp * de[2], cr * de[1] + sr * cp * de[2], -sr * de[1] + cr * cp * de[2]);
  s.accel_body = s.rot.transpose() * (acc - kGravity);
  return s;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

ImuStream gen_imu(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto rng = make_rng(seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&] { return Vec3(gauss(rng), gauss(rng), gauss(rng)); };

  const int n = cfg.num_imu();
  const double dt = 1.0 / cfg.imu_hz;
  const NoiseParams nz = cfg.noise.scaled(cfg.noise_scale);
  ImuStream out;
  out.samples.reserve(static_cast<std::size_t>(n));
  out.bg.reserve(static_cast<std::size_t>(n));
  out.ba.reserve(static_cast<std::size_t>(n));
  Vec3 bg = cfg.bg0;
  Vec3 ba = cfg.ba0;
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const TruthSample tr = truth_at(cfg, t);
    ImuSample s;
    s.stamp = t;
    s.omega_m = tr.omega_body + bg + nz.sigma_g / std::sqrt(dt) * draw();
    s.accel_m = tr.accel_body + ba + nz.sigma_a / std::sqrt(dt) * draw();
    out.samples.push_back(s);
    out.bg.push_back(bg);
    out.ba.push_back(ba);
    if (cfg.bias_walk) {
      bg += nz.sigma_wg * std::sqrt(dt) * draw();
      ba += nz.sigma_wa * std::sqrt(dt) * draw();
    }
  }
  return out;
}

void trajectory_bounds(const SimConfig& cfg, Vec3& lo, Vec3& hi) {
  lo = cfg.center - cfg.amp.cwiseAbs();
  hi = cfg.center + cfg.amp.cwiseAbs();
}

std::vector<Vec3> gen_landmarks(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto rng = make_rng(seed, 2);
  Vec3 lo, hi;
  trajectory_bounds(cfg, lo, hi);
  const Vec3 outer_lo = lo - Vec3::Constant(cfg.max_range);
  const Vec3 outer_hi = hi + Vec3::Constant(cfg.max_range);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(cfg.num_landmarks));
  while (static_cast<int>(out.size()) < cfg.num_landmarks) {
    Vec3 p;
    for (int i = 0; i < 3; ++i) p[i] = outer_lo[i] + (outer_hi[i] - outer_lo[i]) * u01(rng);
    const Vec3 gap = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    const double d = gap.norm();
    if (d >= cfg.min_range && d <= cfg.max_range) out.push_back(p);
  }
  return out;
}

std::vector<FrameObs> gen_frame(const SimConfig& cfg, double t, const std::vector<Vec3>& landmarks,
                                std::uint64_t seed) {
  const TruthSample tr = truth_at(cfg, t);
  const auto frame = static_cast<std::uint64_t>(std::llround(t * cfg.cam_hz));
  auto rng = make_rng(seed, 1000 + frame);
  std::normal_distribution<double> gauss(0.0, cfg.pixel_sigma());
  const double xmax = 0.5 * cfg.width / cfg.focal;
  const double ymax = 0.5 * cfg.height / cfg.focal;
  std::vector<FrameObs> out;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Vec3 pc = to_camera(tr.rot, tr.pos, cfg.ext, landmarks[i]);
    if (!(pc.z() > kMinDepth)) continue;
    const Vec2 uv(pc.x() / pc.z(), pc.y() / pc.z());
    if (std::abs(uv.x()) > xmax || std::abs(uv.y()) > ymax) continue;
    FrameObs o;
    o.id = static_cast<int>(i);
    o.uv = uv;
    if (cfg.pixel_sigma_px > 0.0) o.uv += Vec2(gauss(rng), gauss(rng));
    out.push_back(o);
  }
  return out;
}

ImuState truth_imu(const SimConfig& cfg, const ImuStream& imu, int k) {
  const TruthSample tr = truth_at(cfg, imu.samples.at(static_cast<std::size_t>(k)).stamp);
  ImuState s;
  s.rot = tr.rot;
  s.pos = tr.pos;
  s.vel = tr.vel;
  s.bg = imu.bg[static_cast<std::size_t>(k)];
  s.ba = imu.ba[static_cast<std::size_t>(k)];
  return s;
}

InitialPrior make_prior(const ImuState& truth, const std::vector<std::pair<int, Vec3>>& features,
                        const PriorSigmas& sig, std::uint64_t seed) {
  auto rng = make_rng(seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  InitialPrior out;
  out.x.imu = truth;
  for (const auto& [id, p] : features) {
    FeatureState f;
    f.pos = p;
    f.id = id;
    out.x.features.push_back(f);
  }
  const int n = out.x.dim();
  VecX sd(n);
  sd.segment<3>(ErrorLayout::kTheta).setConstant(sig.rot);
  sd.segment<3>(ErrorLayout::kPos).setConstant(sig.pos);
  sd.segment<3>(ErrorLayout::kVel).setConstant(sig.vel);
  sd.segment<3>(ErrorLayout::kBg).setConstant(sig.bg);
  sd.segment<3>(ErrorLayout::kBa).setConstant(sig.ba);
  if (n > 15) sd.tail(n - 15).setConstant(sig.feat);
  VecX e(n);
  for (int i = 0; i < n; ++i) e[i] = sd[i] * gauss(rng);
  // estimate = truth (+) (-e), so truth = estimate (+) e with e ~ N(0, P0).
  out.x = boxplus(out.x, -e);
  out.p = sd.array().square().matrix().asDiagonal();
  return out;
}

void dump_truth_csv(const SimConfig& cfg, const ImuStream& imu, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write " + path);
  f << "t,px,py,pz,vx,vy,vz,wx,wy,wz,ax,ay,az,wmx,wmy,wmz,amx,amy,amz\n";
  f.precision(10);
  for (const ImuSample& s : imu.samples) {
    const TruthSample tr = truth_at(cfg, s.stamp);
    f << s.stamp << ',' << tr.pos.x() << ',' << tr.pos.y() << ',' << tr.pos.z() << ',' << tr.vel.x() << ','
      << tr.vel.y() << ',' << tr.vel.z() << ',' << tr.omega_body.x() << ',' << tr.omega_body.y() << ','
      << tr.omega_body.z() << ',' << tr.accel_body.x() << ',' << tr.accel_body.y() << ',' << tr.accel_body.z()
      << ',' << s.omega_m.x() << ',' << s.omega_m.y() << ',' << s.omega_m.z() << ',' << s.accel_m.x() << ','
      << s.accel_m.y() << ',' << s.accel_m.z() << '\n';
  }
}

}  // namespace swf
