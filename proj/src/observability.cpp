#include "swf/observability.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace swf {

Eigen::Matrix<double, 3, 4> feature_sub_basis(const Vec3& p) {
  Eigen::Matrix<double, 3, 4> n;
  n.leftCols<3>().setIdentity();
  n.col(3) = skew(p) * kGravity;
  return n;
}

MatX build_basis(const SwfState& x) {
  const ErrorLayout lay = x.layout();
  MatX n = MatX::Zero(lay.dim(), 4);
  n.block<3, 1>(ErrorLayout::kTheta, 3) = -x.imu.rot.transpose() * kGravity;
  n.block<3, 3>(ErrorLayout::kPos, 0).setIdentity();
  n.block<3, 1>(ErrorLayout::kPos, 3) = skew(x.imu.pos) * kGravity;
  n.block<3, 1>(ErrorLayout::kVel, 3) = skew(x.imu.vel) * kGravity;
  for (int i = 0; i < lay.num_clones; ++i) {
    const ClonePose& c = x.clones[i];
    n.block<3, 1>(lay.clone_theta(i), 3) = -c.rot.transpose() * kGravity;
    n.block<3, 3>(lay.clone_pos(i), 0).setIdentity();
    n.block<3, 1>(lay.clone_pos(i), 3) = skew(c.pos) * kGravity;
  }
  for (int j = 0; j < lay.num_features; ++j) {
    n.block<3, 4>(lay.feature(j), 0) = feature_sub_basis(x.features[j].pos);
  }
  return n;
}

MatX build_top_blocks(const SwfState& x) {
  if (!x.features.empty()) throw InvalidInput("build_top_blocks: state carries features (MSCKF layout expected)");
  return build_basis(x);
}

MatX build_aux(const SwfState& x) {
  const ErrorLayout lay = x.layout();
  MatX t = MatX::Identity(lay.dim(), lay.dim());
  const Mat3& r = x.imu.rot;
  t.block<3, 3>(ErrorLayout::kTheta, ErrorLayout::kTheta) = r;
  t.block<3, 3>(ErrorLayout::kPos, ErrorLayout::kTheta) = skew(x.imu.pos) * r;
  t.block<3, 3>(ErrorLayout::kVel, ErrorLayout::kTheta) = skew(x.imu.vel) * r;
  for (int i = 0; i < lay.num_clones; ++i) {
    const ClonePose& c = x.clones[i];
    t.block<3, 3>(lay.clone_theta(i), lay.clone_theta(i)) = c.rot;
    t.block<3, 3>(lay.clone_pos(i), lay.clone_theta(i)) = skew(c.pos) * c.rot;
  }
  for (int j = 0; j < lay.num_features; ++j) {
    t.block<3, 3>(lay.feature(j), ErrorLayout::kTheta) = skew(x.features[j].pos) * r;
  }
  return t;
}

MatX build_const_basis(const ErrorLayout& lay) {
  MatX n = MatX::Zero(lay.dim(), 4);
  n.block<3, 1>(ErrorLayout::kTheta, 3) = -kGravity;
  n.block<3, 3>(ErrorLayout::kPos, 0).setIdentity();
  for (int i = 0; i < lay.num_clones; ++i) {
    n.block<3, 1>(lay.clone_theta(i), 3) = -kGravity;
    n.block<3, 3>(lay.clone_pos(i), 0).setIdentity();
  }
  for (int j = 0; j < lay.num_features; ++j) n.block<3, 3>(lay.feature(j), 0).setIdentity();
  return n;
}

MatX orthonormal_span(const MatX& a, double tol) {
  if (a.cols() == 0) return MatX(a.rows(), 0);
  Eigen::ColPivHouseholderQR<MatX> qr(a);
  qr.setThreshold(tol);
  const auto rank = qr.rank();
  MatX q = qr.householderQ() * MatX::Identity(a.rows(), rank);
  return q;
}

double subspace_distance(const MatX& a, const MatX& b) {
  if (a.rows() != b.rows()) throw InvalidInput("subspace_distance: row counts differ");
  const MatX qa = orthonormal_span(a);
  const MatX qb = orthonormal_span(b);
  if (qa.cols() != a.cols() || qb.cols() != b.cols()) throw RankDeficient("subspace_distance: rank-deficient basis");
  if (qa.cols() != qb.cols()) return std::numbers::pi / 2.0;
  if (qa.cols() == 0) return 0.0;
  // sine of the largest principal angle = ||(I - Qa Qa^T) Qb||_2
  const MatX resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<MatX> svd(resid);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Aligned: return "Aligned";
    case Status::Misaligned: return "Misaligned";
    case Status::Mismatched: return "Mismatched";
  }
  return "?";
}

SubspaceStatus classify(const MatX& basis, const SwfState& xstar, double tol_angle) {
  SubspaceStatus s;
  s.dim = static_cast<int>(basis.cols());
  const MatX ref = build_basis(xstar);
  if (basis.rows() != ref.rows()) throw InvalidInput("classify: basis does not match the state layout");
  if (s.dim != 4) {
    s.status = Status::Mismatched;
    s.angle = std::numbers::pi / 2.0;
    return s;
  }
  s.angle = subspace_distance(basis, ref);
  s.status = s.angle < tol_angle ? Status::Aligned : Status::Misaligned;
  return s;
}

// ---------------------------------------------------------------------------
// Auditor

Auditor::Auditor(const SwfState& x0, AuditConfig cfg)
    : cfg_(cfg), num_clones_(static_cast<int>(x0.clones.size())) {
  basis_ = orthonormal_span(build_basis(x0));
  initial_ = basis_;
}

void Auditor::reorthonormalize() {
  if (basis_.cols() == 0) return;
  basis_ = orthonormal_span(basis_);
}

void Auditor::propagate(const Eigen::Matrix<double, 15, 15>& phi, const Eigen::Matrix<double, 15, 15>& qd) {
  basis_.topRows<15>() = (phi * basis_.topRows<15>()).eval();
  reorthonormalize();
  if (cfg_.keep_log) log_.push_back({LogStep::Kind::Propagate, phi, qd, {}, {}, 0});
}

void Auditor::update(const MatX& h, const VecX& rdiag) {
  if (h.cols() != basis_.rows()) throw InvalidInput("audit update: Jacobian width does not match tracked layout");
  if (cfg_.keep_log) log_.push_back({LogStep::Kind::Update, h, MatX(), rdiag, {}, 0});
  const Eigen::Index k = basis_.cols();
  if (k == 0 || h.rows() == 0) return;
  const MatX hb = h * basis_;
  const double hnorm = h.norm();
  Eigen::JacobiSVD<MatX> svd(hb, Eigen::ComputeFullV);
  const VecX& sv = svd.singularValues();
  const double thr = cfg_.null_tol * hnorm;

  // Singular values are sorted descending; directions past min(r, k) are null.
  Eigen::Index keep_from = sv.size();
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) < thr) {
      keep_from = i;
      break;
    }
  }
  if (keep_from > 0 && keep_from < sv.size() && sv(keep_from) > 0.0) {
    if (sv(keep_from - 1) / sv(keep_from) < cfg_.min_gap) pending_inconclusive_ = true;
  }
  basis_ = (basis_ * svd.matrixV().rightCols(k - keep_from)).eval();
  reorthonormalize();
}

void Auditor::augment() {
  const Eigen::Index at = ErrorLayout::kImuDim + ErrorLayout::kCloneDim * num_clones_;
  MatX next(basis_.rows() + 6, basis_.cols());
  next.topRows(at) = basis_.topRows(at);
  next.middleRows(at, 6) = basis_.topRows(6);
  next.bottomRows(basis_.rows() - at) = basis_.bottomRows(basis_.rows() - at);
  basis_ = std::move(next);
  ++num_clones_;
  reorthonormalize();
  if (cfg_.keep_log) log_.push_back({LogStep::Kind::Augment, MatX(), MatX(), {}, {}, static_cast<int>(at)});
}

void Auditor::marginalize(const std::vector<int>& keep, int clones_after) {
  MatX next(static_cast<Eigen::Index>(keep.size()), basis_.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= basis_.rows()) throw InvalidInput("audit marginalize: row out of range");
    next.row(static_cast<Eigen::Index>(i)) = basis_.row(keep[i]);
  }
  basis_ = std::move(next);
  num_clones_ = clones_after;
  reorthonormalize();
  if (cfg_.keep_log) log_.push_back({LogStep::Kind::Marginalize, MatX(), MatX(), {}, keep, 0});
}

void Auditor::transform(const std::function<void(MatX&)>& apply_inverse_left) {
  if (cfg_.keep_log) {
    MatX dense = MatX::Identity(basis_.rows(), basis_.rows());
    apply_inverse_left(dense);
    log_.push_back({LogStep::Kind::Transform, dense, MatX(), {}, {}, 0});
  }
  apply_inverse_left(basis_);
  reorthonormalize();
}

void Auditor::feature_init(const MatX& hx1, const Eigen::Matrix3d& hf1, const VecX& r1diag) {
  if (hx1.cols() != basis_.rows() || hx1.rows() != 3) throw InvalidInput("audit feature_init: bad Jacobian shape");
  if (cfg_.keep_log) log_.push_back({LogStep::Kind::FeatureInit, hx1, hf1, r1diag, {}, 0});
  MatX next(basis_.rows() + 3, basis_.cols());
  next.topRows(basis_.rows()) = basis_;
  next.bottomRows(3) = -hf1.lu().solve(hx1 * basis_);
  basis_ = std::move(next);
  reorthonormalize();
}

SubspaceStatus Auditor::classify(const SwfState& xstar) const {
  if (static_cast<int>(xstar.clones.size()) != num_clones_) throw InvalidInput("audit: layout drift");
  return swf::classify(basis_, xstar, cfg_.tol_angle);
}

const AuditRecord& Auditor::record(double t, const std::string& step, const SwfState& xstar) {
  records_.push_back({t, step, classify(xstar), pending_inconclusive_});
  pending_inconclusive_ = false;
  return records_.back();
}

// ---------------------------------------------------------------------------
// Information-form crosscheck

namespace {

MatX pinv_sym(const MatX& a) {
  Eigen::SelfAdjointEigenSolver<MatX> es(a);
  const VecX& ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  VecX inv = ev.unaryExpr([tol](double v) { return std::abs(v) > tol ? 1.0 / v : 0.0; });
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

void symm(MatX& a) { a = (0.5 * (a + a.transpose())).eval(); }

}  // namespace

MatX prior_without_directions(const MatX& prior, const MatX& n) {
  const MatX q = orthonormal_span(n);
  MatX proj = MatX::Identity(prior.rows(), prior.rows()) - q * q.transpose();
  MatX out = proj * prior * proj;
  symm(out);
  return out;
}

CrosscheckResult info_nullspace_crosscheck(const MatX& prior, std::span<const LogStep> log, double rel_tol,
                                           double min_gap) {
  MatX lam = prior;
  for (const LogStep& s : log) {
    const Eigen::Index n = lam.rows();
    switch (s.kind) {
      case LogStep::Kind::Propagate: {
        MatX phi_inv = MatX::Identity(n, n);
        phi_inv.topLeftCorner(15, 15) = s.a.inverse();
        MatX a = phi_inv.transpose() * lam * phi_inv;
        // Qd = G G^T from its eigendecomposition, then Woodbury.
        Eigen::SelfAdjointEigenSolver<MatX> es(s.b);
        std::vector<Eigen::Index> cols;
        for (Eigen::Index i = 0; i < 15; ++i) {
          if (es.eigenvalues()(i) > 1e-14 * es.eigenvalues().maxCoeff()) cols.push_back(i);
        }
        MatX g = MatX::Zero(n, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
          g.block(0, static_cast<Eigen::Index>(c), 15, 1) =
              es.eigenvectors().col(cols[c]) * std::sqrt(es.eigenvalues()(cols[c]));
        }
        const MatX ag = a * g;
        const MatX inner = MatX::Identity(g.cols(), g.cols()) + g.transpose() * ag;
        lam = a - ag * inner.ldlt().solve(ag.transpose());
        break;
      }
      case LogStep::Kind::Update:
        lam += s.a.transpose() * s.rdiag.cwiseInverse().asDiagonal() * s.a;
        break;
      case LogStep::Kind::Augment: {
        const double c = std::max(1.0, lam.trace() / static_cast<double>(std::max<Eigen::Index>(n, 1)));
        // [x; clone] ordering first, clone rows appended at the end.
        MatX sel = MatX::Zero(6, n);
        sel.leftCols(6).setIdentity();
        MatX big = MatX::Zero(n + 6, n + 6);
        big.topLeftCorner(n, n) = lam + c * sel.transpose() * sel;
        big.topRightCorner(n, 6) = -c * sel.transpose();
        big.bottomLeftCorner(6, n) = -c * sel;
        big.bottomRightCorner(6, 6) = c * MatX::Identity(6, 6);
        // Move the clone rows to their slot.
        std::vector<Eigen::Index> order;
        for (Eigen::Index i = 0; i < s.insert_at; ++i) order.push_back(i);
        for (Eigen::Index i = 0; i < 6; ++i) order.push_back(n + i);
        for (Eigen::Index i = s.insert_at; i < n; ++i) order.push_back(i);
        lam.resize(n + 6, n + 6);
        for (Eigen::Index r = 0; r < n + 6; ++r) {
          for (Eigen::Index cc = 0; cc < n + 6; ++cc) lam(r, cc) = big(order[r], order[cc]);
        }
        break;
      }
      case LogStep::Kind::Marginalize: {
        std::vector<bool> kept(static_cast<std::size_t>(n), false);
        for (int k : s.keep) kept[static_cast<std::size_t>(k)] = true;
        std::vector<int> drop;
        for (int i = 0; i < n; ++i) {
          if (!kept[static_cast<std::size_t>(i)]) drop.push_back(i);
        }
        const auto nk = static_cast<Eigen::Index>(s.keep.size());
        const auto nd = static_cast<Eigen::Index>(drop.size());
        MatX lkk(nk, nk), lkd(nk, nd), ldd(nd, nd);
        for (Eigen::Index r = 0; r < nk; ++r) {
          for (Eigen::Index c = 0; c < nk; ++c) lkk(r, c) = lam(s.keep[r], s.keep[c]);
          for (Eigen::Index c = 0; c < nd; ++c) lkd(r, c) = lam(s.keep[r], drop[c]);
        }
        for (Eigen::Index r = 0; r < nd; ++r) {
          for (Eigen::Index c = 0; c < nd; ++c) ldd(r, c) = lam(drop[r], drop[c]);
        }
        lam = lkk - lkd * pinv_sym(ldd) * lkd.transpose();
        break;
      }
      case LogStep::Kind::Transform: {
        // P <- Ti P Ti^T  <=>  Lambda <- Ti^-T Lambda Ti^-1
        const MatX t = s.a.inverse();
        lam = t.transpose() * lam * t;
        break;
      }
      case LogStep::Kind::FeatureInit: {
        MatX h(3, n + 3);
        h.leftCols(n) = s.a;
        h.rightCols(3) = s.b;
        MatX big = MatX::Zero(n + 3, n + 3);
        big.topLeftCorner(n, n) = lam;
        big += h.transpose() * s.rdiag.cwiseInverse().asDiagonal() * h;
        lam = std::move(big);
        break;
      }
    }
    symm(lam);
  }

  // Jacobi scaling: the raw information spans many decades (bias priors vs.
  // loosely known features), which hides the null directions.
  VecX sc(lam.rows());
  for (Eigen::Index i = 0; i < lam.rows(); ++i) sc[i] = lam(i, i) > 0.0 ? 1.0 / std::sqrt(lam(i, i)) : 1.0;
  lam = sc.asDiagonal() * lam * sc.asDiagonal();
  symm(lam);

  CrosscheckResult out;
  Eigen::SelfAdjointEigenSolver<MatX> es(lam);
  out.eigenvalues = es.eigenvalues();
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> null_cols;
  double largest_null = 0.0;
  double smallest_kept = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lam.rows(); ++i) {
    const double v = es.eigenvalues()(i);
    if (top == 0.0 || v < rel_tol * top) {
      null_cols.push_back(i);
      largest_null = std::max(largest_null, std::abs(v));
    } else {
      smallest_kept = std::min(smallest_kept, v);
    }
  }
  out.nullspace.resize(lam.rows(), static_cast<Eigen::Index>(null_cols.size()));
  for (std::size_t c = 0; c < null_cols.size(); ++c) {
    out.nullspace.col(static_cast<Eigen::Index>(c)) = sc.asDiagonal() * es.eigenvectors().col(null_cols[c]);
  }
  if (out.nullspace.cols() > 0) out.nullspace = orthonormal_span(out.nullspace);
  if (largest_null > 0.0 && std::isfinite(smallest_kept) && smallest_kept / largest_null < min_gap) {
    out.inconclusive = true;
  }
  return out;
}

}  // namespace swf
