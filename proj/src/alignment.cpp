#include "swf/alignment.h"

#include <cmath>

#include "swf/observability.h"

namespace swf {

DirectTransform make_direct(const MatX& n_minus, const MatX& n_plus) {
  if (n_minus.rows() != n_plus.rows() || n_minus.cols() != 4 || n_plus.cols() != 4) {
    throw InvalidInput("make_direct: bases must be N x 4 over one layout");
  }
  DirectTransform t;
  t.alpha = n_minus.col(3) - n_plus.col(3);
  // beta^T = e4^T (N^T N)^-1 N^T
  const Eigen::Matrix4d ntn = n_plus.transpose() * n_plus;
  Eigen::LDLT<Eigen::Matrix4d> ldlt(ntn);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw SingularTransform("make_direct: N(x+) rank deficient");
  const Eigen::Vector4d row = ldlt.solve(Eigen::Vector4d::UnitW());
  t.beta = n_plus * row;
  if (std::abs(t.denom()) < 1e-12) throw SingularTransform("make_direct: 1 + beta^T alpha vanishes");
  return t;
}

DirectTransform make_direct(const SwfState& x_minus, const SwfState& x_plus) {
  return make_direct(build_basis(x_minus), build_basis(x_plus));
}

RankOneInverse invert_direct(const DirectTransform& t) {
  const double d = t.denom();
  if (std::abs(d) < 1e-12) throw SingularTransform("invert_direct: 1 + beta^T alpha vanishes");
  return {-t.alpha / d, t.beta};
}

void apply_left(MatX& m, const DirectTransform& t) {
  const RankOneInverse inv = invert_direct(t);
  m.noalias() += inv.alpha_p * (inv.beta.transpose() * m);
}

void apply_direct(MatX& p, const DirectTransform& t) {
  if (p.rows() != t.alpha.size()) throw InvalidInput("apply_direct: layout mismatch");
  const RankOneInverse inv = invert_direct(t);
  const VecX pb = p * inv.beta;  // P symmetric: beta^T P = pb^T
  const double bpb = inv.beta.dot(pb);
  // P + a' pb^T + pb a'^T + bpb a' a'^T = P + a' w^T + w a'^T, w = pb + bpb/2 a'
  MatX u(p.rows(), 2), v(p.rows(), 2);
  u.col(0) = inv.alpha_p;
  u.col(1) = pb + 0.5 * bpb * inv.alpha_p;
  v.col(0) = u.col(1);
  v.col(1) = inv.alpha_p;
  p.noalias() += u * v.transpose();
  repair_psd(p);
}

MatX dense(const DirectTransform& t) {
  MatX m = MatX::Identity(t.alpha.size(), t.alpha.size());
  m.noalias() += t.alpha * t.beta.transpose();
  return m;
}

IndirectTransform make_indirect(const SwfState& x_minus, const SwfState& x_plus) {
  if (x_minus.clones.size() != x_plus.clones.size() || x_minus.features.size() != x_plus.features.size()) {
    throw InvalidInput("make_indirect: layouts differ");
  }
  IndirectTransform t;
  t.layout = x_plus.layout();
  t.rot_plus = x_plus.imu.rot;
  t.rot_rel = x_plus.imu.rot.transpose() * x_minus.imu.rot;
  t.dpos = x_minus.imu.pos - x_plus.imu.pos;
  t.dvel = x_minus.imu.vel - x_plus.imu.vel;
  t.clones.reserve(x_plus.clones.size());
  for (std::size_t i = 0; i < x_plus.clones.size(); ++i) {
    const ClonePose& cm = x_minus.clones[i];
    const ClonePose& cp = x_plus.clones[i];
    t.clones.push_back({cp.rot.transpose() * cm.rot, cm.rot, cm.pos - cp.pos});
  }
  t.dfeat.reserve(x_plus.features.size());
  for (std::size_t j = 0; j < x_plus.features.size(); ++j) {
    t.dfeat.push_back(x_minus.features[j].pos - x_plus.features[j].pos);
  }
  return t;
}

namespace {

// Row operations of T^-1 on any row-addressable expression.
template <typename M>
void indirect_rows(M&& m, const IndirectTransform& t) {
  const ErrorLayout& lay = t.layout;
  // T_R: current orientation rows.
  auto th = m.template middleRows<3>(ErrorLayout::kTheta);
  th = (t.rot_rel * th).eval();
  // T_I: position and velocity rows pick up the rotated theta rows.
  const Eigen::Matrix<double, 3, Eigen::Dynamic> rth = t.rot_plus * th;
  m.template middleRows<3>(ErrorLayout::kPos).noalias() += skew(t.dpos) * rth;
  m.template middleRows<3>(ErrorLayout::kVel).noalias() += skew(t.dvel) * rth;
  // T_W: per clone, using the clone's own old theta rows.
  Eigen::Matrix<double, 3, Eigen::Dynamic> old(3, m.cols());
  for (int i = 0; i < lay.num_clones; ++i) {
    const auto& c = t.clones[i];
    auto cth = m.template middleRows<3>(lay.clone_theta(i));
    old = cth;
    m.template middleRows<3>(lay.clone_pos(i)).noalias() += (skew(c.dpos) * c.rot_minus) * old;
    cth.noalias() = c.rot_rel * old;
  }
  // T_F: feature rows, one 3-row block at a time.
  for (int j = 0; j < lay.num_features; ++j) {
    m.template middleRows<3>(lay.feature(j)).noalias() += skew(t.dfeat[j]) * rth;
  }
}

}  // namespace

void apply_left(MatX& m, const IndirectTransform& t) {
  if (m.rows() != t.layout.dim()) throw InvalidInput("apply_left: layout mismatch");
  indirect_rows(m, t);
}

void apply_indirect(MatX& p, const IndirectTransform& t) {
  if (p.rows() != t.layout.dim() || p.cols() != p.rows()) throw InvalidInput("apply_indirect: layout mismatch");
  indirect_rows(p, t);
  indirect_rows(p.transpose(), t);
  repair_psd(p);
}

bool repair_psd(MatX& p) {
  symmetrize(p);
  const Eigen::Index n = p.rows();
  if (n == 0) return false;
  // Cheap probe: the diagonal bounds the smallest eigenvalue from above.
  if (p.diagonal().minCoeff() < -1e-9) {
    p.diagonal().array() += 1e-12 * std::abs(p.trace()) / static_cast<double>(n);
    return true;
  }
  return false;
}

}  // namespace swf
