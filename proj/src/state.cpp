#include "swf/state.h"

#include <string>

namespace swf {

int SwfState::find_feature(int id) const {
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].id == id) return static_cast<int>(j);
  }
  return -1;
}

SwfState boxplus(const SwfState& x, const VecX& delta) {
  const ErrorLayout lay = x.layout();
  if (delta.size() != lay.dim()) {
    throw InvalidInput("boxplus: delta has " + std::to_string(delta.size()) +
                       " entries, state dimension is " + std::to_string(lay.dim()));
  }
  SwfState out = x;
  out.imu.rot = x.imu.rot * exp_so3(delta.segment<3>(ErrorLayout::kTheta));
  out.imu.pos += delta.segment<3>(ErrorLayout::kPos);
  out.imu.vel += delta.segment<3>(ErrorLayout::kVel);
  out.imu.bg += delta.segment<3>(ErrorLayout::kBg);
  out.imu.ba += delta.segment<3>(ErrorLayout::kBa);
  for (int i = 0; i < lay.num_clones; ++i) {
    auto& c = out.clones[i];
    c.rot = c.rot * exp_so3(delta.segment<3>(lay.clone_theta(i)));
    c.pos += delta.segment<3>(lay.clone_pos(i));
  }
  for (int j = 0; j < lay.num_features; ++j) {
    out.features[j].pos += delta.segment<3>(lay.feature(j));
  }
  return out;
}

VecX boxminus(const SwfState& x, const SwfState& xhat) {
  if (x.clones.size() != xhat.clones.size() || x.features.size() != xhat.features.size()) {
    throw InvalidInput("boxminus: layout mismatch");
  }
  for (std::size_t j = 0; j < x.features.size(); ++j) {
    if (x.features[j].id != xhat.features[j].id) {
      throw InvalidInput("boxminus: feature id mismatch at slot " + std::to_string(j));
    }
  }
  const ErrorLayout lay = x.layout();
  VecX d(lay.dim());
  d.segment<3>(ErrorLayout::kTheta) = log_so3(xhat.imu.rot.transpose() * x.imu.rot);
  d.segment<3>(ErrorLayout::kPos) = x.imu.pos - xhat.imu.pos;
  d.segment<3>(ErrorLayout::kVel) = x.imu.vel - xhat.imu.vel;
  d.segment<3>(ErrorLayout::kBg) = x.imu.bg - xhat.imu.bg;
  d.segment<3>(ErrorLayout::kBa) = x.imu.ba - xhat.imu.ba;
  for (int i = 0; i < lay.num_clones; ++i) {
    d.segment<3>(lay.clone_theta(i)) = log_so3(xhat.clones[i].rot.transpose() * x.clones[i].rot);
    d.segment<3>(lay.clone_pos(i)) = x.clones[i].pos - xhat.clones[i].pos;
  }
  for (int j = 0; j < lay.num_features; ++j) {
    d.segment<3>(lay.feature(j)) = x.features[j].pos - xhat.features[j].pos;
  }
  return d;
}

Vec3 global_orientation_error(const SwfState& x, const SwfState& xhat) {
  return log_so3(x.imu.rot * xhat.imu.rot.transpose());
}

void symmetrize(MatX& p) {
  const auto n = p.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double v = 0.5 * (p(r, c) + p(c, r));
      p(r, c) = v;
      p(c, r) = v;
    }
  }
}

}  // namespace swf
