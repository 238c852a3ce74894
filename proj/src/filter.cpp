#include "swf/filter.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

namespace swf {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Std: return "std";
    case Strategy::Fej: return "fej";
    case Strategy::UsaIT: return "usa-it";
    case Strategy::UsaDT: return "usa-dt";
    case Strategy::UsaDTR: return "usa-dtr";
  }
  return "?";
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Msckf: return "msckf";
    case Mode::Slam: return "slam";
    case Mode::Hybrid: return "hybrid";
  }
  return "?";
}

const char* to_string(InitVariant v) { return v == InitVariant::Batch ? "batch" : "separate"; }

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

Strategy parse_strategy(const std::string& s) {
  const std::string k = lower(s);
  if (k == "std") return Strategy::Std;
  if (k == "fej") return Strategy::Fej;
  if (k == "usa-it") return Strategy::UsaIT;
  if (k == "usa-dt") return Strategy::UsaDT;
  if (k == "usa-dtr") return Strategy::UsaDTR;
  throw InvalidInput("unknown strategy '" + s + "'");
}

Mode parse_mode(const std::string& s) {
  const std::string k = lower(s);
  if (k == "msckf") return Mode::Msckf;
  if (k == "slam") return Mode::Slam;
  if (k == "hybrid") return Mode::Hybrid;
  throw InvalidInput("unknown mode '" + s + "'");
}

InitVariant parse_init_variant(const std::string& s) {
  const std::string k = lower(s);
  if (k == "separate") return InitVariant::Separate;
  if (k == "batch") return InitVariant::Batch;
  throw InvalidInput("unknown init variant '" + s + "'");
}

double chi2_quantile(int dof, double level) {
  thread_local std::map<std::pair<int, double>, double> cache;
  const auto key = std::make_pair(dof, level);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  boost::math::chi_squared dist(dof);
  const double q = boost::math::quantile(dist, level);
  cache.emplace(key, q);
  return q;
}

namespace {

std::vector<int> support(const MatX& h) {
  std::vector<int> cols;
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    if (!h.col(c).isZero(0.0)) cols.push_back(static_cast<int>(c));
  }
  return cols;
}

}  // namespace

VecX joseph_update(MatX& p, const MatX& h, const VecX& r, const VecX& rdiag) {
  const Eigen::Index n = p.rows();
  if (h.cols() != n || h.rows() != r.size() || r.size() != rdiag.size()) {
    throw InvalidInput("joseph_update: dimension mismatch");
  }
  if (h.rows() == 0) return VecX::Zero(n);
  const std::vector<int> sup = support(h);
  const MatX hs = h(Eigen::all, sup);
  MatX pht = p(Eigen::all, sup) * hs.transpose();  // N x r
  MatX s = hs * pht(sup, Eigen::all);
  s.diagonal() += rdiag;
  Eigen::LLT<MatX> llt(s);
  if (llt.info() != Eigen::Success) throw std::runtime_error("joseph_update: innovation covariance not positive definite");
  const MatX k = llt.solve(pht.transpose()).transpose();  // N x r
  const VecX dx = k * r;
  // (I - K H) P (I - K H)^T + K R K^T = P - (M K^T + K M^T), M = P H^T - K S / 2.
  // Holds for any K; evaluated as one symmetric rank-2r product on the lower half.
  const Eigen::Index nr = h.rows();
  MatX a(n, 2 * nr), b(n, 2 * nr);
  a.leftCols(nr) = pht;
  a.leftCols(nr).noalias() -= 0.5 * k * s;
  a.rightCols(nr) = k;
  b.leftCols(nr) = k;
  b.rightCols(nr) = a.leftCols(nr);
  p.triangularView<Eigen::Lower>() -= a * b.transpose();
  p.triangularView<Eigen::StrictlyUpper>() = p.transpose();
  return dx;
}

bool compress_rows(MatX& h, VecX& r) {
  const std::vector<int> sup = support(h);
  const auto s = static_cast<Eigen::Index>(sup.size());
  if (h.rows() <= s) return false;
  MatX aug(h.rows(), s + 1);
  aug.leftCols(s) = h(Eigen::all, sup);
  aug.col(s) = r;
  Eigen::HouseholderQR<Eigen::Ref<MatX>> qr(aug);
  const MatX rr = aug.topRows(s).triangularView<Eigen::Upper>();
  MatX out = MatX::Zero(s, h.cols());
  for (Eigen::Index c = 0; c < s; ++c) out.col(sup[c]) = rr.col(c);
  r = rr.col(s);
  h = std::move(out);
  return true;
}

// ---------------------------------------------------------------------------

SlidingWindowFilter::SlidingWindowFilter(FilterConfig cfg, SwfState x0, MatX p0, double t0)
    : cfg_(cfg), est_{std::move(x0), std::move(p0)}, t_(t0) {
  if (est_.p.rows() != est_.x.dim() || est_.p.cols() != est_.x.dim()) {
    throw InvalidInput("filter: initial covariance does not match the state layout");
  }
  if (cfg_.mode == Mode::Msckf && !est_.x.features.empty()) {
    throw InvalidInput("filter: MSCKF mode keeps no features in the state");
  }
  if (cfg_.max_clones < 2 || cfg_.min_obs < 2) throw InvalidInput("filter: window too small");
  if (!est_.x.imu_first) est_.x.imu_first = est_.x.imu;
  for (auto& c : est_.x.clones) {
    if (!c.first_rot) c.first_rot = c.rot;
    if (!c.first_pos) c.first_pos = c.pos;
  }
  for (auto& f : est_.x.features) {
    if (!f.first_pos) f.first_pos = f.pos;
  }
}

void SlidingWindowFilter::enable_audit(AuditConfig cfg) { auditor_ = std::make_unique<Auditor>(est_.x, cfg); }

void SlidingWindowFilter::record(const std::string& step) {
  if (auditor_) auditor_->record(t_, step, est_.x);
}

std::vector<CloneLin> SlidingWindowFilter::clone_lin() const {
  std::vector<CloneLin> lin;
  lin.reserve(est_.x.clones.size());
  const bool fej = cfg_.strategy == Strategy::Fej;
  for (const ClonePose& c : est_.x.clones) {
    if (fej) {
      lin.push_back({*c.first_rot, *c.first_pos});
    } else {
      lin.push_back({c.rot, c.pos});
    }
  }
  return lin;
}

std::vector<Obs> SlidingWindowFilter::to_obs(const FeatureTrack& t) const {
  std::vector<Obs> out;
  out.reserve(t.obs.size());
  const auto& clones = est_.x.clones;
  std::size_t ci = 0;
  for (const auto& e : t.obs) {
    while (ci < clones.size() && clones[ci].stamp < e.stamp) ++ci;
    if (ci < clones.size() && clones[ci].stamp == e.stamp) {
      out.push_back({static_cast<int>(ci), e.uv, cfg_.pixel_sigma});
    }
  }
  return out;
}

bool SlidingWindowFilter::passes_gate(const MatX& h, const VecX& r, const VecX& rdiag) const {
  if (!cfg_.gate) return true;
  const std::vector<int> sup = support(h);
  const MatX hs = h(Eigen::all, sup);
  MatX s = hs * est_.p(sup, sup) * hs.transpose();
  s.diagonal() += rdiag;
  const double chi2 = r.dot(s.ldlt().solve(r));
  return std::isfinite(chi2) && chi2 <= chi2_quantile(static_cast<int>(r.size()), cfg_.chi2_level);
}

void SlidingWindowFilter::predict(std::span<const ImuSample> samples) {
  if (samples.size() < 2) throw PropagationError("predict: need at least two IMU samples");
  if (std::abs(samples.front().stamp - t_) > 1e-9) throw PropagationError("predict: IMU samples do not start at filter time");
  const ImuState* lin = nullptr;
  if (cfg_.strategy == Strategy::Fej && est_.x.imu_first) lin = &*est_.x.imu_first;
  const PropResult pr = propagate_imu(est_.x.imu, samples, cfg_.imu_noise, lin);
  propagate_cov(est_.p, pr.phi, pr.qd);
  est_.x.imu = pr.imu_next;
  est_.x.imu_first = pr.imu_next;
  t_ = samples.back().stamp;
  if (auditor_) auditor_->propagate(pr.phi, pr.qd);
  record("predict");
}

void SlidingWindowFilter::augment_clone() {
  SwfState& x = est_.x;
  if (static_cast<int>(x.clones.size()) >= cfg_.max_clones) throw InvalidInput("augment: window full, marginalize first");
  const ErrorLayout lay = x.layout();
  const int at = ErrorLayout::kImuDim + ErrorLayout::kCloneDim * lay.num_clones;
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(lay.dim() + 6));
  for (int i = 0; i < at; ++i) idx.push_back(i);
  for (int i = 0; i < 6; ++i) idx.push_back(i);
  for (int i = at; i < lay.dim(); ++i) idx.push_back(i);
  MatX next = est_.p(idx, idx);
  est_.p = std::move(next);

  ClonePose c;
  c.rot = x.imu.rot;
  c.pos = x.imu.pos;
  c.stamp = t_;
  c.first_rot = c.rot;
  c.first_pos = c.pos;
  x.clones.push_back(c);
  if (auditor_) auditor_->augment();
  record("augment");
}

void SlidingWindowFilter::ekf_update(const MatX& h, const VecX& r, const VecX& rdiag) {
  const VecX dx = joseph_update(est_.p, h, r, rdiag);
  est_.x = boxplus(est_.x, dx);
}

void SlidingWindowFilter::apply_transform(const SwfState& x_from, const SwfState& x_to) {
  if (!is_usa(cfg_.strategy)) return;
  try {
    if (cfg_.strategy == Strategy::UsaIT) {
      const IndirectTransform t = make_indirect(x_from, x_to);
      apply_indirect(est_.p, t);
      if (auditor_) auditor_->transform([&t](MatX& m) { apply_left(m, t); });
    } else {
      const DirectTransform t = make_direct(x_from, x_to);
      apply_direct(est_.p, t);
      if (auditor_) auditor_->transform([&t](MatX& m) { apply_left(m, t); });
    }
  } catch (const SingularTransform&) {
    ++stats_.usa_skipped;
  }
}

void SlidingWindowFilter::align(const SwfState& x_minus) { apply_transform(x_minus, est_.x); }

void SlidingWindowFilter::update_and_hook(const MatX& h, const VecX& r, const VecX& rdiag, const std::string& label) {
  const SwfState x_minus = est_.x;
  ekf_update(h, r, rdiag);
  if (auditor_) auditor_->update(h, rdiag);
  align(x_minus);
  record(label);
}

void SlidingWindowFilter::slam_update(const std::vector<FrameObs>& obs) {
  if (cfg_.mode == Mode::Msckf) throw InvalidInput("slam_update: not available in MSCKF mode");
  const SwfState& x = est_.x;
  if (x.clones.empty() || obs.empty()) return;
  const ErrorLayout lay = x.layout();
  const std::vector<CloneLin> lin = clone_lin();
  const bool fej = cfg_.strategy == Strategy::Fej;
  const int newest = lay.num_clones - 1;

  std::vector<MatX> hs;
  std::vector<VecX> rs;
  Eigen::Index rows = 0;
  for (const FrameObs& o : obs) {
    const int j = x.find_feature(o.id);
    if (j < 0) throw InvalidInput("slam_update: feature " + std::to_string(o.id) + " not in state");
    const FeatureState& f = x.features[j];
    const Obs ob{newest, o.uv, cfg_.pixel_sigma};
    StackedJac sj = stack_feature(x.clones, lin, cfg_.ext, f.pos, fej ? *f.first_pos : f.pos, {&ob, 1}, lay);
    if (sj.rows() == 0) continue;
    sj.hx.block(0, lay.feature(j), sj.rows(), 3) = sj.hf;
    if (!passes_gate(sj.hx, sj.resid, sj.rdiag)) {
      ++stats_.slam_gated;
      continue;
    }
    rows += sj.rows();
    hs.push_back(std::move(sj.hx));
    rs.push_back(std::move(sj.resid));
  }
  if (rows == 0) return;
  MatX h(rows, lay.dim());
  VecX r(rows);
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < hs.size(); ++k) {
    h.middleRows(at, hs[k].rows()) = hs[k];
    r.segment(at, rs[k].size()) = rs[k];
    at += hs[k].rows();
  }
  update_and_hook(h, r, VecX::Constant(rows, cfg_.pixel_sigma * cfg_.pixel_sigma), "slam");
}

void SlidingWindowFilter::msckf_update(const std::vector<FeatureTrack>& tracks) {
  const SwfState& x = est_.x;
  if (x.clones.size() < 2 || tracks.empty()) return;
  const ErrorLayout lay = x.layout();
  const std::vector<CloneLin> lin = clone_lin();

  std::vector<ProjectedSystem> used;
  Eigen::Index rows = 0;
  for (const FeatureTrack& t : tracks) {
    if (static_cast<int>(used.size()) >= cfg_.max_msckf) break;
    const std::vector<Obs> obs = to_obs(t);
    if (static_cast<int>(obs.size()) < cfg_.min_obs) continue;
    try {
      const Vec3 pf = triangulate(x.clones, cfg_.ext, obs);
      const StackedJac sj = stack_feature(x.clones, lin, cfg_.ext, pf, pf, obs, lay);
      ProjectedSystem ps = nullspace_project(sj);
      if (!passes_gate(ps.hx, ps.resid, ps.rdiag)) {
        ++stats_.msckf_gated;
        continue;
      }
      rows += ps.hx.rows();
      used.push_back(std::move(ps));
      ++stats_.msckf_used;
    } catch (const TriangulationFailed&) {
      ++stats_.msckf_failed;
    } catch (const ProjectionFailed&) {
      ++stats_.msckf_failed;
    }
  }
  if (rows == 0) return;
  MatX h(rows, lay.dim());
  VecX r(rows);
  Eigen::Index at = 0;
  for (const auto& ps : used) {
    h.middleRows(at, ps.hx.rows()) = ps.hx;
    r.segment(at, ps.resid.size()) = ps.resid;
    at += ps.hx.rows();
  }
  compress_rows(h, r);
  update_and_hook(h, r, VecX::Constant(h.rows(), cfg_.pixel_sigma * cfg_.pixel_sigma), "msckf");
}

bool SlidingWindowFilter::delayed_init(FeatureTrack& track) {
  if (cfg_.mode == Mode::Msckf) throw InvalidInput("delayed_init: not available in MSCKF mode");
  SwfState& x = est_.x;
  if (static_cast<int>(x.features.size()) >= cfg_.max_slam) return false;
  if (x.find_feature(track.id) >= 0) throw InvalidInput("delayed_init: feature already in state");
  const std::vector<Obs> obs = to_obs(track);
  if (obs.size() < 2) return false;

  const ErrorLayout lay = x.layout();
  const std::vector<CloneLin> lin = clone_lin();
  Vec3 pf0;
  SplitSystem sp;
  try {
    pf0 = triangulate(x.clones, cfg_.ext, obs);
    sp = split_subsystems(stack_feature(x.clones, lin, cfg_.ext, pf0, pf0, obs, lay));
  } catch (const TriangulationFailed&) {
    ++stats_.init_failed;
    track.msckf_only = true;
    return false;
  } catch (const ProjectionFailed&) {
    ++stats_.init_demoted;
    track.msckf_only = true;
    return false;
  }
  if (sp.hf1_cond > cfg_.max_init_cond) {
    ++stats_.init_demoted;
    track.msckf_only = true;
    return false;
  }
  if (!passes_gate(sp.sub2.hx, sp.sub2.resid, sp.sub2.rdiag)) {
    ++stats_.init_failed;
    track.msckf_only = true;
    return false;
  }

  const SwfState x_minus = x;
  const Vec3 pf1 = pf0 + sp.hf1.partialPivLu().solve(sp.sub1.resid);

  MatX hx1 = sp.sub1.hx;
  Mat3 hf1 = sp.hf1;
  VecX r1diag = sp.sub1.rdiag;
  ProjectedSystem sub2 = sp.sub2;
  if (cfg_.strategy == Strategy::UsaDTR) {
    // Re-evaluate the feature Jacobians at the corrected feature estimate.
    try {
      SplitSystem ss = split_subsystems(stack_feature(x.clones, lin, cfg_.ext, pf1, pf1, obs, lay));
      hx1 = ss.sub1.hx;
      hf1 = ss.hf1;
      r1diag = ss.sub1.rdiag;
      sub2 = ss.sub2;
    } catch (const std::runtime_error&) {
      // keep the original linearization
    }
  }

  // Substep 1: add the feature.
  const Eigen::Index n = lay.dim();
  const std::vector<int> sup = support(hx1);
  const MatX hs = hx1(Eigen::all, sup);
  const MatX pht = est_.p(Eigen::all, sup) * hs.transpose();  // N x 3
  const Mat3 hf1_inv = hf1.inverse();
  const MatX pxf = -pht * hf1_inv.transpose();
  Mat3 inner = hs * pht(sup, Eigen::all);
  inner.diagonal() += r1diag;
  Mat3 pff = hf1_inv * inner * hf1_inv.transpose();
  pff = 0.5 * (pff + pff.transpose()).eval();
  est_.p.conservativeResize(n + 3, n + 3);
  est_.p.topRightCorner(n, 3) = pxf;
  est_.p.bottomLeftCorner(3, n) = pxf.transpose();
  est_.p.bottomRightCorner<3, 3>() = pff;

  FeatureState f;
  f.pos = pf1;
  f.id = track.id;
  f.first_pos = pf1;
  x.features.push_back(f);
  if (auditor_) auditor_->feature_init(hx1, hf1, r1diag);

  const bool usa_transform = cfg_.strategy == Strategy::UsaDT || cfg_.strategy == Strategy::UsaIT;
  SwfState xa_minus = x;
  xa_minus.imu = x_minus.imu;
  xa_minus.features.back().pos = pf0;
  if (usa_transform && cfg_.init_variant == InitVariant::Separate) apply_transform(xa_minus, x);

  // Substep 2: feature-free rows.
  if (sub2.hx.rows() > 0) {
    MatX h2 = MatX::Zero(sub2.hx.rows(), n + 3);
    h2.leftCols(n) = sub2.hx;
    const SwfState x_before = x;
    ekf_update(h2, sub2.resid, sub2.rdiag);
    if (auditor_) auditor_->update(h2, sub2.rdiag);
    if (usa_transform && cfg_.init_variant == InitVariant::Batch) {
      apply_transform(xa_minus, est_.x);
    } else {
      apply_transform(x_before, est_.x);
    }
  } else if (usa_transform && cfg_.init_variant == InitVariant::Batch) {
    apply_transform(xa_minus, est_.x);
  }
  record("init");
  ++stats_.init_ok;
  return true;
}

void SlidingWindowFilter::marginalize(bool oldest_clone, const std::vector<int>& feature_ids) {
  SwfState& x = est_.x;
  if (!oldest_clone && feature_ids.empty()) throw InvalidInput("marginalize: empty drop set");
  if (oldest_clone && x.clones.empty()) throw InvalidInput("marginalize: no clone to drop");
  const ErrorLayout lay = x.layout();
  std::vector<bool> drop(static_cast<std::size_t>(lay.dim()), false);
  if (oldest_clone) {
    for (int k = 0; k < 6; ++k) drop[static_cast<std::size_t>(lay.clone_theta(0) + k)] = true;
  }
  std::set<int> feat_slots;
  for (int id : feature_ids) {
    const int j = x.find_feature(id);
    if (j < 0) throw InvalidInput("marginalize: feature " + std::to_string(id) + " not in state");
    feat_slots.insert(j);
    for (int k = 0; k < 3; ++k) drop[static_cast<std::size_t>(lay.feature(j) + k)] = true;
  }
  std::vector<int> keep;
  keep.reserve(drop.size());
  for (int i = 0; i < lay.dim(); ++i) {
    if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  MatX next = est_.p(keep, keep);
  est_.p = std::move(next);

  double dropped_stamp = 0.0;
  if (oldest_clone) {
    dropped_stamp = x.clones.front().stamp;
    x.clones.erase(x.clones.begin());
  }
  for (auto it = feat_slots.rbegin(); it != feat_slots.rend(); ++it) x.features.erase(x.features.begin() + *it);

  if (oldest_clone) {
    for (auto it = tracks_.begin(); it != tracks_.end();) {
      auto& o = it->second.obs;
      o.erase(std::remove_if(o.begin(), o.end(), [&](const FeatureTrack::Entry& e) { return e.stamp <= dropped_stamp; }),
              o.end());
      it = o.empty() ? tracks_.erase(it) : std::next(it);
    }
  }
  if (auditor_) auditor_->marginalize(keep, static_cast<int>(x.clones.size()));
  record("marginalize");
}

void SlidingWindowFilter::process_frame(std::span<const ImuSample> imu, const std::vector<FrameObs>& obs) {
  predict(imu);
  augment_clone();
  SwfState& x = est_.x;
  const double t = t_;

  std::vector<FrameObs> slam_obs;
  std::set<int> seen_slam;
  for (auto& kv : tracks_) kv.second.seen = false;
  for (const FrameObs& o : obs) {
    if (x.find_feature(o.id) >= 0) {
      slam_obs.push_back(o);
      seen_slam.insert(o.id);
      continue;
    }
    FeatureTrack& tr = tracks_[o.id];
    tr.id = o.id;
    tr.obs.push_back({t, o.uv});
    tr.seen = true;
  }

  const bool window_full = static_cast<int>(x.clones.size()) == cfg_.max_clones;
  const double oldest = x.clones.front().stamp;

  // Longest tracks first, ties by id, so selection is deterministic.
  std::vector<FeatureTrack*> seen;
  std::vector<FeatureTrack*> lost;
  for (auto& kv : tracks_) (kv.second.seen ? seen : lost).push_back(&kv.second);
  auto longer = [](const FeatureTrack* a, const FeatureTrack* b) {
    return a->obs.size() != b->obs.size() ? a->obs.size() > b->obs.size() : a->id < b->id;
  };
  std::sort(seen.begin(), seen.end(), longer);
  std::sort(lost.begin(), lost.end(), longer);

  std::vector<int> ready;
  if (cfg_.mode != Mode::Msckf) {
    int capacity = cfg_.max_slam - static_cast<int>(x.features.size());
    for (FeatureTrack* tr : seen) {
      if (capacity <= 0) break;
      if (!tr->msckf_only && static_cast<int>(tr->obs.size()) >= cfg_.max_clones - 1) {
        ready.push_back(tr->id);
        --capacity;
      }
    }
  }

  std::vector<FeatureTrack> cands;
  if (cfg_.mode != Mode::Slam) {
    for (FeatureTrack* tr : lost) {
      if (static_cast<int>(tr->obs.size()) >= cfg_.min_obs) cands.push_back(*tr);
    }
    if (window_full) {
      for (FeatureTrack* tr : seen) {
        if (std::find(ready.begin(), ready.end(), tr->id) != ready.end()) continue;
        if (tr->obs.front().stamp == oldest && static_cast<int>(tr->obs.size()) >= cfg_.min_obs) {
          cands.push_back(*tr);
        }
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [&](const FeatureTrack& a, const FeatureTrack& b) { return longer(&a, &b); });
    if (static_cast<int>(cands.size()) > cfg_.max_msckf) cands.resize(static_cast<std::size_t>(cfg_.max_msckf));
  }
  for (FeatureTrack* tr : lost) tracks_.erase(tr->id);

  if (!cands.empty()) {
    msckf_update(cands);
    for (const FeatureTrack& c : cands) tracks_.erase(c.id);
  }
  if (cfg_.mode != Mode::Msckf && !slam_obs.empty()) slam_update(slam_obs);
  for (int id : ready) {
    auto it = tracks_.find(id);
    if (it == tracks_.end()) continue;
    if (delayed_init(it->second)) {
      seen_slam.insert(id);
      tracks_.erase(it);
    }
  }

  std::vector<int> lost_feats;
  for (const FeatureState& f : x.features) {
    if (!seen_slam.count(f.id)) lost_feats.push_back(f.id);
  }
  const bool drop_clone = static_cast<int>(x.clones.size()) >= cfg_.max_clones;
  if (drop_clone || !lost_feats.empty()) marginalize(drop_clone, lost_feats);
}

}  // namespace swf
