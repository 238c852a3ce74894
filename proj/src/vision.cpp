#include "swf/vision.h"

#include <cmath>
#include <vector>

namespace swf {

Vec3 to_camera(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf) {
  return ext.rot * (rot.transpose() * (pf - pos)) + ext.pos;
}

Vec2 project(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf) {
  const Vec3 pc = to_camera(rot, pos, ext, pf);
  if (!(pc.z() > kMinDepth)) throw BehindCamera("feature behind camera");
  return {pc.x() / pc.z(), pc.y() / pc.z()};
}

ObsJacobian observation_jacobian(const Mat3& rot, const Vec3& pos, const Extrinsics& ext, const Vec3& pf) {
  const Vec3 body = rot.transpose() * (pf - pos);
  const Vec3 pc = ext.rot * body + ext.pos;
  if (!(pc.z() > kMinDepth)) throw BehindCamera("feature behind camera at linearization point");
  const double iz = 1.0 / pc.z();
  Mat23 dproj;
  dproj << iz, 0.0, -pc.x() * iz * iz,
           0.0, iz, -pc.y() * iz * iz;
  const Mat3 rcg = ext.rot * rot.transpose();
  ObsJacobian j;
  j.d_theta = dproj * ext.rot * skew(body);
  j.d_feat = dproj * rcg;
  j.d_pos = -j.d_feat;
  return j;
}

StackedJac stack_feature(std::span<const ClonePose> clones, std::span<const CloneLin> lin, const Extrinsics& ext,
                         const Vec3& pf, const Vec3& lin_pf, std::span<const Obs> obs, const ErrorLayout& layout) {
  if (lin.size() != clones.size()) throw InvalidInput("stack_feature: one linearization point per clone expected");
  struct Row {
    Vec2 r;
    ObsJacobian j;
    int clone;
    double var;
  };
  std::vector<Row> rows;
  rows.reserve(obs.size());
  for (const Obs& o : obs) {
    if (o.clone_index < 0 || o.clone_index >= static_cast<int>(clones.size())) {
      throw InvalidInput("stack_feature: observation references a clone outside the window");
    }
    const ClonePose& c = clones[o.clone_index];
    try {
      const Vec2 pred = project(c, ext, pf);
      const ObsJacobian j = observation_jacobian(lin[o.clone_index].rot, lin[o.clone_index].pos, ext, lin_pf);
      rows.push_back({o.uv - pred, j, o.clone_index, o.sigma * o.sigma});
    } catch (const BehindCamera&) {
      // dropped
    }
  }

  const Eigen::Index m = 2 * static_cast<Eigen::Index>(rows.size());
  StackedJac out;
  out.hx = MatX::Zero(m, layout.dim());
  out.hf.resize(m, 3);
  out.resid.resize(m);
  out.rdiag.resize(m);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index r = 2 * static_cast<Eigen::Index>(k);
    out.hx.block<2, 3>(r, layout.clone_theta(rows[k].clone)) = rows[k].j.d_theta;
    out.hx.block<2, 3>(r, layout.clone_pos(rows[k].clone)) = rows[k].j.d_pos;
    out.hf.block<2, 3>(r, 0) = rows[k].j.d_feat;
    out.resid.segment<2>(r) = rows[k].r;
    out.rdiag.segment<2>(r).setConstant(rows[k].var);
  }
  return out;
}

namespace {

Vec3 camera_center(const ClonePose& c, const Extrinsics& ext) {
  return c.pos - c.rot * ext.rot.transpose() * ext.pos;
}

}  // namespace

Vec3 triangulate(std::span<const ClonePose> clones, const Extrinsics& ext, std::span<const Obs> obs) {
  if (obs.size() < 2) throw TriangulationFailed("need at least two observations");

  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const Obs& o : obs) {
    if (o.clone_index < 0 || o.clone_index >= static_cast<int>(clones.size())) {
      throw InvalidInput("triangulate: observation references a clone outside the window");
    }
  }
  double baseline = 0.0;
  const Vec3 c0 = camera_center(clones[obs.front().clone_index], ext);
  for (const Obs& o : obs) {
    const ClonePose& c = clones[o.clone_index];
    const Vec3 center = camera_center(c, ext);
    const Vec3 bearing = (c.rot * ext.rot.transpose() * Vec3(o.uv.x(), o.uv.y(), 1.0)).normalized();
    const Mat3 perp = Mat3::Identity() - bearing * bearing.transpose();
    a += perp;
    b += perp * center;
    baseline = std::max(baseline, (center - c0).norm());
  }
  if (baseline < 1e-3) throw TriangulationFailed("baseline too small");

  Eigen::JacobiSVD<Mat3> svd(a);
  const auto sv = svd.singularValues();
  if (sv(2) <= 0.0 || sv(0) / sv(2) > 1e8) throw TriangulationFailed("ill-conditioned ray intersection");
  Vec3 pf = a.ldlt().solve(b);

  // Gauss-Newton on reprojection error.
  for (int iter = 0; iter < 5; ++iter) {
    Mat3 jtj = Mat3::Zero();
    Vec3 jtr = Vec3::Zero();
    for (const Obs& o : obs) {
      const ClonePose& c = clones[o.clone_index];
      const Vec3 pc = to_camera(c.rot, c.pos, ext, pf);
      if (!(pc.z() > kMinDepth)) throw TriangulationFailed("point behind a camera");
      const double iz = 1.0 / pc.z();
      Mat23 dproj;
      dproj << iz, 0.0, -pc.x() * iz * iz,
               0.0, iz, -pc.y() * iz * iz;
      const Mat23 j = dproj * ext.rot * c.rot.transpose();
      const Vec2 r = o.uv - Vec2(pc.x() * iz, pc.y() * iz);
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    const Vec3 step = jtj.ldlt().solve(jtr);
    if (!step.allFinite()) throw TriangulationFailed("Gauss-Newton diverged");
    pf += step;
    if (step.norm() < 1e-12 * (1.0 + pf.norm())) break;
  }
  for (const Obs& o : obs) {
    const ClonePose& c = clones[o.clone_index];
    if (!(to_camera(c.rot, c.pos, ext, pf).z() > kMinDepth)) throw TriangulationFailed("point behind a camera");
  }
  return pf;
}

SplitSystem split_subsystems(const StackedJac& j) {
  const Eigen::Index m = j.rows();
  if (m <= 3) throw ProjectionFailed("need more than three rows to project out the feature");
  const double var = j.rdiag(0);
  if ((j.rdiag.array() - var).abs().maxCoeff() > 1e-12 * var) {
    throw ProjectionFailed("noise must be isotropic within one feature");
  }

  // rotate only the nonzero columns of hx
  std::vector<int> sup;
  for (Eigen::Index c = 0; c < j.hx.cols(); ++c) {
    if (!j.hx.col(c).isZero(0.0)) sup.push_back(static_cast<int>(c));
  }
  MatX hx = j.hx(Eigen::all, sup);
  Eigen::Matrix<double, Eigen::Dynamic, 3> hf = j.hf;
  VecX res = j.resid;

  for (int col = 0; col < 3; ++col) {
    for (Eigen::Index row = m - 1; row > col; --row) {
      Eigen::JacobiRotation<double> g;
      g.makeGivens(hf(row - 1, col), hf(row, col));
      hf.applyOnTheLeft(row - 1, row, g.adjoint());
      hx.applyOnTheLeft(row - 1, row, g.adjoint());
      res.applyOnTheLeft(row - 1, row, g.adjoint());
    }
  }

  SplitSystem out;
  out.hf1 = hf.topRows<3>();
  const Vec3 d = out.hf1.diagonal().cwiseAbs();
  const double scale = j.hf.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-12 * scale)) throw ProjectionFailed("feature Jacobian is rank deficient");
  Eigen::JacobiSVD<Mat3> svd(out.hf1);
  out.hf1_cond = svd.singularValues()(0) / svd.singularValues()(2);

  out.sub1.hx = MatX::Zero(3, j.hx.cols());
  out.sub1.hx(Eigen::all, sup) = hx.topRows(3);
  out.sub1.resid = res.head(3);
  out.sub1.rdiag = VecX::Constant(3, var);
  out.sub2.hx = MatX::Zero(m - 3, j.hx.cols());
  out.sub2.hx(Eigen::all, sup) = hx.bottomRows(m - 3);
  out.sub2.resid = res.tail(m - 3);
  out.sub2.rdiag = VecX::Constant(m - 3, var);
  return out;
}

ProjectedSystem nullspace_project(const StackedJac& j) { return split_subsystems(j).sub2; }

}  // namespace swf
