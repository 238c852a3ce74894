// Acceptance checks, one PASS/FAIL line per criterion.
// SWF_ACCEPT_RUNS overrides the Monte-Carlo run count (default 100).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "sim_drive.h"
#include "swf/alignment.h"
#include "swf/experiment.h"
#include "swf/observability.h"
#include "test_util.h"

using namespace swf;
using namespace swf::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
  bool ok = true;
  std::ostringstream note;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      note << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& title, Check& c) {
  std::printf("%s criterion %d: %s%s\n", c.ok ? "PASS" : "FAIL", id, title.c_str(), c.note.str().c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

SwfState wrap(const ImuState& s) {
  SwfState x;
  x.imu = s;
  return x;
}

std::vector<CloneLin> lin_of(const SwfState& x) {
  std::vector<CloneLin> l;
  for (const auto& c : x.clones) l.push_back({c.rot, c.pos});
  return l;
}

// window of n clones looking at one point from a short baseline
struct Scene {
  SwfState x;
  Extrinsics ext;
  Vec3 pf;
  std::vector<Obs> obs;
};

Scene make_scene(std::mt19937_64& g, int n, int m_extra, double sigma) {
  Scene s;
  s.ext = rand_ext(g);
  s.x = rand_state(g, 0, m_extra);
  const Mat3 r0 = rand_rot(g);
  const Vec3 p0 = rand_vec(g, 2.0);
  s.pf = p0 + r0 * s.ext.rot.transpose() * (Vec3(0.2, -0.1, 5.0) - s.ext.pos);
  std::normal_distribution<double> noise(0.0, sigma);
  for (int i = 0; i < n; ++i) {
    ClonePose c;
    c.rot = r0 * exp_so3(rand_vec(g, 0.05));
    c.pos = p0 + Vec3(0.3 * i, 0.1 * std::sin(i), 0.05 * i) + rand_vec(g, 0.02);
    c.stamp = i;
    c.first_rot = c.rot;
    c.first_pos = c.pos;
    s.x.clones.push_back(c);
    s.obs.push_back({i, project(c, s.ext, s.pf) + Vec2(noise(g), noise(g)), sigma});
  }
  return s;
}

SwfState corrected(std::mt19937_64& g, const SwfState& x, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  VecX d(x.dim());
  for (int i = 0; i < d.size(); ++i) d[i] = n(g);
  return boxplus(x, d);
}

bool is_update(const std::string& s) { return s == "msckf" || s == "slam" || s == "init"; }

// ---------------------------------------------------------------------------

void criterion1() {
  Check c;
  std::mt19937_64 g(101);
  double worst_a = 0.0, worst_b = 0.0, worst_c = 0.0, worst_d = 0.0;
  double t_a, t_b, t_c, t_d;

  auto t0 = Clock::now();
  for (int k = 0; k < 1000; ++k) {
    const ImuState s0 = rand_imu(g);
    const auto samples = rand_samples(g, 2 + k % 20, 0.005);
    const PropResult pr = propagate_imu(s0, samples, NoiseParams{});
    const MatX n1 = build_basis(wrap(pr.imu_next));
    worst_a = std::max(worst_a, (pr.phi * build_basis(wrap(s0)) - n1).norm() / std::max(1.0, n1.norm()));
  }
  t_a = seconds_since(t0);

  t0 = Clock::now();
  for (int k = 0; k < 200; ++k) {
    Scene s = make_scene(g, 3 + k % 5, 2, 1e-3);
    FeatureState f;
    f.pos = s.pf;
    f.id = 9;
    s.x.features.push_back(f);
    const ErrorLayout lay = s.x.layout();
    const StackedJac sj = stack_feature(s.x.clones, lin_of(s.x), s.ext, s.pf, s.pf, s.obs, lay);
    MatX h = sj.hx;
    h.middleCols<3>(lay.feature(2)) = sj.hf;
    worst_b = std::max(worst_b, (h * build_basis(s.x)).norm() / h.norm());
  }
  t_b = seconds_since(t0);

  t0 = Clock::now();
  for (int k = 0; k < 200; ++k) {
    Scene s = make_scene(g, 3 + k % 6, 0, 2.0 / 458.0);
    const Vec3 pf = triangulate(s.x.clones, s.ext, s.obs);
    const StackedJac sj = stack_feature(s.x.clones, lin_of(s.x), s.ext, pf, pf, s.obs, s.x.layout());
    const ProjectedSystem ps = nullspace_project(sj);
    worst_c = std::max(worst_c, (ps.hx * build_basis(s.x)).norm() / sj.hx.norm());
  }
  t_c = seconds_since(t0);

  // Separate delayed init: substep 1 moves only the feature, so the
  // feature-free rows [hx2 | 0] still annihilate the basis at x+.
  t0 = Clock::now();
  for (int k = 0; k < 200; ++k) {
    Scene s = make_scene(g, 4 + k % 5, 1, 2.0 / 458.0);
    // linearize away from the least-squares point so that substep 1 moves pf
    const Vec3 pf0 = triangulate(s.x.clones, s.ext, s.obs) + rand_vec(g, 0.05);
    const ErrorLayout lay = s.x.layout();
    const StackedJac sj = stack_feature(s.x.clones, lin_of(s.x), s.ext, pf0, pf0, s.obs, lay);
    const SplitSystem sp = split_subsystems(sj);
    const Vec3 pf1 = pf0 + sp.hf1.lu().solve(sp.sub1.resid);
    SwfState xp = s.x;
    FeatureState f;
    f.pos = pf1;
    f.id = 77;
    xp.features.push_back(f);
    MatX h2 = MatX::Zero(sp.sub2.hx.rows(), lay.dim() + 3);
    h2.leftCols(lay.dim()) = sp.sub2.hx;
    worst_d = std::max(worst_d, (h2 * build_basis(xp)).norm() / sj.hx.norm());
    c.expect((pf1 - pf0).norm() > 1e-6, "substep 1 left the feature in place");
  }
  t_d = seconds_since(t0);

  c.expect(worst_a < 1e-9, "Phi N");
  c.expect(worst_b < 1e-9, "SLAM H N");
  c.expect(worst_c < 1e-9, "projected Hx2 N");
  c.expect(worst_d < 1e-9, "H2 N(x+)");
  c.expect(std::max({t_a, t_b, t_c, t_d}) < 1.0, "time");
  c.note << " (PhiN " << fmt(worst_a) << ", HN " << fmt(worst_b) << ", Hx2N " << fmt(worst_c) << ", H2N+ "
         << fmt(worst_d) << "; max " << fmt(std::max({t_a, t_b, t_c, t_d})) << " s)";
  report(1, "nullspace identities", c);
}

void criterion2() {
  Check c;
  std::mt19937_64 g(102);
  double w_direct = 0.0, w_inv = 0.0, w_ind = 0.0, w_ind_n = 0.0, w_aux = 0.0;
  for (int k = 0; k < 100; ++k) {
    const SwfState xm = rand_state(g, k % 6, (k + 1) % 4);
    const SwfState xp = corrected(g, xm, 0.1);
    const MatX nm = build_basis(xm), np = build_basis(xp);

    const DirectTransform t = make_direct(xm, xp);
    const MatX td = dense(t);
    w_direct = std::max(w_direct, (td * np - nm).norm() / nm.norm());
    const RankOneInverse inv = invert_direct(t);
    const MatX tinv = MatX::Identity(td.rows(), td.cols()) + inv.alpha_p * inv.beta.transpose();
    const MatX tinv_ref = td.inverse();
    w_inv = std::max(w_inv, (tinv - tinv_ref).norm() / tinv_ref.norm());

    const IndirectTransform it = make_indirect(xm, xp);
    MatX fact = MatX::Identity(xm.dim(), xm.dim());
    apply_left(fact, it);
    const MatX ref = build_aux(xp).inverse() * build_aux(xm);
    w_ind = std::max(w_ind, (fact - ref).norm() / ref.norm());
    // T N(x+) = N(x-) with T = fact^-1
    w_ind_n = std::max(w_ind_n, (fact.inverse() * np - nm).norm() / nm.norm());

    const MatX nconst = build_const_basis(xm.layout());
    w_aux = std::max(w_aux, (build_aux(xm) * nm - nconst).norm() / nconst.norm());
  }
  c.expect(w_direct < 1e-10, "direct T N+ = N-");
  c.expect(w_inv < 1e-10, "rank-1 inverse");
  c.expect(w_ind < 1e-10, "indirect factored product");
  c.expect(w_ind_n < 1e-10, "indirect T N+ = N-");
  c.expect(w_aux < 1e-10, "T(x) N(x) = N_const");
  c.note << " (direct " << fmt(w_direct) << ", inverse " << fmt(w_inv) << ", indirect " << fmt(w_ind) << "/"
         << fmt(w_ind_n) << ", aux " << fmt(w_aux) << ")";
  report(2, "transform contracts", c);
}

void criterion3() {
  Check c;
  const auto t0 = Clock::now();
  SimConfig sc;
  sc.duration = 1.0;
  Drive d(sc, 4);
  const InitialPrior p = d.prior(10);
  SlidingWindowFilter f(d.filter_config(Strategy::Std, Mode::Slam), p.x, p.p, 0.0);
  f.enable_audit();
  for (int j = 1; j <= 3; ++j) f.process_frame(d.frame_imu(j), d.frame_obs(j));
  const auto& rec = f.auditor()->records();

  // first predict, first correction, second correction
  const AuditRecord* pred = nullptr;
  std::vector<const AuditRecord*> upd;
  for (const auto& r : rec) {
    if (!pred && r.step == "predict") pred = &r;
    if (is_update(r.step)) upd.push_back(&r);
  }
  c.expect(pred && pred->status.status == Status::Aligned && pred->status.dim == 4, "predict Aligned dim 4");
  c.expect(upd.size() >= 2, "two corrections");
  if (upd.size() >= 2) {
    c.expect(upd[0]->status.status == Status::Misaligned && upd[0]->status.dim == 4, "first correction Misaligned");
    c.expect(upd[1]->status.status == Status::Mismatched && upd[1]->status.dim == 3, "second correction Mismatched");
  }
  const double span_np = subspace_distance(f.auditor()->basis(), build_basis(f.state()).leftCols(3));
  c.expect(span_np < 1e-6, "surviving span = N_p");

  // augmentation and marginalization never change status, for several strategies
  int checked = 0;
  for (Strategy s : {Strategy::Std, Strategy::Fej, Strategy::UsaDT}) {
    SimConfig s2;
    s2.duration = 2.0;
    Drive d2(s2, 6);
    const InitialPrior p2 = d2.prior(5);
    SlidingWindowFilter h(d2.filter_config(s, Mode::Hybrid), p2.x, p2.p, 0.0);
    h.enable_audit();
    for (int j = 1; j <= d2.frames(); ++j) h.process_frame(d2.frame_imu(j), d2.frame_obs(j));
    const auto& r2 = h.auditor()->records();
    for (std::size_t i = 1; i < r2.size(); ++i) {
      if (r2[i].step != "augment" && r2[i].step != "marginalize") continue;
      ++checked;
      c.expect(r2[i].status.status == r2[i - 1].status.status && r2[i].status.dim == r2[i - 1].status.dim,
               std::string(to_string(s)) + " " + r2[i].step + " changed status");
    }
  }
  c.expect(checked > 50, "enough augment/marginalize steps");
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "time");

  std::string timeline;
  for (std::size_t i = 0; i < std::min<std::size_t>(rec.size(), 6); ++i) {
    timeline += (i ? " -> " : "") + rec[i].step + ":" + to_string(rec[i].status.status) + "/" +
                std::to_string(rec[i].status.dim);
  }
  c.note << " (" << timeline << "; N_p angle " << fmt(span_np) << "; " << checked << " aug/marg steps; "
         << fmt(secs) << " s)";
  report(3, "Std status evolution and augment/marginalize invariance", c);
}

void criterion4() {
  Check c;
  SimConfig sc;
  sc.duration = 30.0;
  Drive d(sc, 21);
  double worst = 0.0;
  int epochs = 0;
  for (Strategy s : {Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR}) {
    const InitialPrior p = d.prior(0);
    SlidingWindowFilter f(d.filter_config(s, Mode::Msckf), p.x, p.p, 0.0);
    f.enable_audit();
    for (int j = 1; j <= d.frames(); ++j) {
      f.process_frame(d.frame_imu(j), d.frame_obs(j));
      const MatX& b = f.auditor()->basis();
      c.expect(b.rows() == f.state().dim(), "basis rows");
      c.expect(b.cols() == 4, std::string(to_string(s)) + " dim");
      if (b.cols() == 4) worst = std::max(worst, subspace_distance(b, build_top_blocks(f.state())));
      ++epochs;
    }
    for (const auto& r : f.auditor()->records()) worst = std::max(worst, r.status.angle);
  }
  c.expect(worst < 1e-6, "angle to top-two-block basis");

  // Std: the MSCKF correction keeps the subspace at the pre-update estimate.
  const InitialPrior p = d.prior(0);
  SlidingWindowFilter f(d.filter_config(Strategy::Std, Mode::Msckf), p.x, p.p, 0.0);
  f.enable_audit();
  std::map<int, FeatureTrack> tracks;
  for (int j = 1; j <= 6; ++j) {
    f.predict(d.frame_imu(j));
    f.augment_clone();
    for (const FrameObs& o : d.frame_obs(j)) {
      tracks[o.id].id = o.id;
      tracks[o.id].obs.push_back({f.time(), o.uv});
    }
  }
  std::vector<FeatureTrack> mature;
  for (const auto& [id, t] : tracks) {
    if (t.obs.size() == 6 && mature.size() < 20) mature.push_back(t);
  }
  const SwfState xm = f.state();
  const double before = subspace_distance(f.auditor()->basis(), build_top_blocks(xm));
  f.msckf_update(mature);
  const double std_minus = subspace_distance(f.auditor()->basis(), build_top_blocks(xm));
  const double std_plus = subspace_distance(f.auditor()->basis(), build_top_blocks(f.state()));
  c.expect(f.stats().msckf_used > 0, "Std msckf update happened");
  c.expect(before < 1e-6 && std_minus < 1e-6, "Std basis = top blocks at x-");
  c.expect(f.auditor()->basis().cols() == 4, "Std dim 4");
  c.note << " (USA IT/DT/DTR over " << epochs << " epochs: max angle " << fmt(worst) << "; Std after first MSCKF: "
         << fmt(std_minus) << " to top blocks at x-, " << fmt(std_plus) << " at x+)";
  report(4, "MSCKF-mode subspace is the top-two-block basis", c);
}

// Delayed initializations of up to `limit` five-view tracks compared with the
// information form over the measured block (clones + new feature). The full
// prior is singular (the newest clone duplicates the IMU pose), the clone
// marginal is not. Returns the number of initializations compared.
int init_oracle(Strategy s, InitVariant v, int limit, double& w_cov, double& w_mean) {
  SimConfig sc;
  sc.duration = 1.0;
  Drive d(sc, 9);
  FilterConfig fc = d.filter_config(s, Mode::Hybrid);
  fc.gate = false;
  fc.init_variant = v;
  const InitialPrior p = d.prior(0);
  SlidingWindowFilter f(fc, p.x, p.p, 0.0);
  std::map<int, FeatureTrack> tracks;
  for (int j = 1; j <= 5; ++j) {
    f.predict(d.frame_imu(j));
    f.augment_clone();
    for (const FrameObs& o : d.frame_obs(j)) {
      tracks[o.id].id = o.id;
      tracks[o.id].obs.push_back({f.time(), o.uv});
    }
  }
  int tested = 0;
  for (auto& [id, tr] : tracks) {
    if (tr.obs.size() < 5 || tested >= limit) continue;
    const SwfState x0 = f.state();
    const MatX p0 = f.cov();
    const ErrorLayout lay = x0.layout();
    std::vector<Obs> obs;
    for (std::size_t k = 0; k < tr.obs.size(); ++k) obs.push_back({static_cast<int>(k), tr.obs[k].uv, fc.pixel_sigma});
    const Vec3 pf0 = triangulate(x0.clones, fc.ext, obs);
    const StackedJac sj = stack_feature(x0.clones, lin_of(x0), fc.ext, pf0, pf0, obs, lay);
    SlidingWindowFilter gf(f.config(), f.state(), f.cov(), f.time());
    if (!gf.delayed_init(tr)) continue;

    const int n = lay.dim();
    const int nc = 6 * static_cast<int>(x0.clones.size());
    const int c0 = lay.clone_theta(0);
    MatX lambda = MatX::Zero(nc + 3, nc + 3);
    lambda.topLeftCorner(nc, nc) = p0.block(c0, c0, nc, nc).inverse();
    MatX jac(sj.rows(), nc + 3);
    jac << sj.hx.middleCols(c0, nc), sj.hf;
    const double w = 1.0 / (fc.pixel_sigma * fc.pixel_sigma);
    lambda += w * jac.transpose() * jac;
    const MatX cov = lambda.completeOrthogonalDecomposition().pseudoInverse();
    const VecX delta = cov * (w * jac.transpose() * sj.resid);

    std::vector<int> idx;
    for (int i = 0; i < nc; ++i) idx.push_back(c0 + i);
    for (int i = 0; i < 3; ++i) idx.push_back(n + i);
    w_cov = std::max(w_cov, (MatX(gf.cov()(idx, idx)) - cov).norm() / cov.norm());
    SwfState xa = x0;
    FeatureState ft;
    ft.pos = pf0;
    ft.id = id;
    xa.features.push_back(ft);
    const VecX got = boxminus(gf.state(), xa)(idx);
    w_mean = std::max(w_mean, (got - delta).norm() / delta.norm());
    ++tested;
  }
  return tested;
}

void criterion5() {
  Check c;
  // Std covariance and mean; with USA only the mean is comparable, the
  // covariance is aligned on purpose.
  double w_cov = 0.0, w_mean = 0.0, w_cov_usa = 0.0;
  int tested = 0;
  for (InitVariant v : {InitVariant::Separate, InitVariant::Batch}) {
    tested += init_oracle(Strategy::Std, v, 5, w_cov, w_mean);
    for (Strategy s : {Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR}) {
      tested += init_oracle(s, v, 3, w_cov_usa, w_mean);
    }
  }
  c.expect(tested >= 20, "initializations tested");
  c.expect(w_cov < 1e-8, "delayed init covariance");
  c.expect(w_mean < 1e-8, "delayed init mean");

  // sparse transforms vs. dense congruence
  std::mt19937_64 g(105);
  double w_dir = 0.0, w_ind = 0.0;
  for (int k = 0; k < 50; ++k) {
    const SwfState xm = rand_state(g, 1 + k % 5, k % 3);  // N <= 15 + 30 + 6
    const SwfState xp = corrected(g, xm, 0.1);
    const MatX p = rand_spd(g, xm.dim());
    const DirectTransform t = make_direct(xm, xp);
    const MatX ti = dense(t).inverse();
    MatX a = p;
    apply_direct(a, t);
    const MatX ra = ti * p * ti.transpose();
    w_dir = std::max(w_dir, (a - ra).norm() / ra.norm());
    const MatX tii = build_aux(xp).inverse() * build_aux(xm);
    MatX b = p;
    apply_indirect(b, make_indirect(xm, xp));
    const MatX rb = tii * p * tii.transpose();
    w_ind = std::max(w_ind, (b - rb).norm() / rb.norm());
  }
  c.expect(w_dir < 1e-8 && w_ind < 1e-8, "sparse transforms");

  // auditor basis vs. information-matrix nullspace over a 20-step run
  double w_cc = 0.0;
  bool cc_ok = true;
  {
    SimConfig sc;
    sc.duration = 1.0;
    Drive d(sc, 10);
    for (Strategy s : {Strategy::Std, Strategy::UsaDT, Strategy::UsaIT}) {
      FilterConfig fc = d.filter_config(s, Mode::Hybrid);
      fc.max_clones = 4;
      AuditConfig ac;
      ac.keep_log = true;
      const InitialPrior p = d.prior(4);
      SlidingWindowFilter f(fc, p.x, p.p, 0.0);
      f.enable_audit(ac);
      int j = 1;
      while (f.auditor()->records().size() < 20) f.process_frame(d.frame_imu(j), d.frame_obs(j)), ++j;
      const MatX prior = prior_without_directions(p.p.inverse(), build_basis(p.x));
      const CrosscheckResult cc = info_nullspace_crosscheck(prior, f.auditor()->log());
      if (cc.inconclusive || cc.nullspace.cols() != f.auditor()->basis().cols()) {
        cc_ok = false;
        continue;
      }
      w_cc = std::max(w_cc, subspace_distance(cc.nullspace, f.auditor()->basis()));
    }
  }
  c.expect(cc_ok && w_cc < 1e-6, "information crosscheck");
  c.note << " (delayed init: mean " << fmt(w_mean) << ", cov " << fmt(w_cov) << " over " << tested
         << " inits; transforms " << fmt(w_dir) << "/" << fmt(w_ind) << "; crosscheck angle " << fmt(w_cc) << ")";
  report(5, "oracle equivalences", c);
}

// ---------------------------------------------------------------------------

struct McData {
  std::map<Strategy, McSummary> two_px;
  std::map<Strategy, McSummary> five_px;
  double seconds = 0.0;
  int runs = 0;
};

double third_mean(const std::vector<double>& v, int which) {
  const std::size_t n = v.size();
  return window_mean(v, which * n / 3, (which + 1) * n / 3);
}

McData run_mc(int runs) {
  McData out;
  out.runs = runs;
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.runs = runs;
  spec.seed = 1000;
  spec.filter.mode = Mode::Hybrid;
  spec.strategies = {Strategy::Std, Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR};
  out.two_px = run_monte_carlo(spec).summary;
  spec.sim.pixel_sigma_px = 5.0;
  spec.strategies = {Strategy::Fej, Strategy::UsaDTR};
  out.five_px = run_monte_carlo(spec).summary;
  out.seconds = seconds_since(t0);
  return out;
}

void criterion6(const McData& mc) {
  Check c;
  const McSummary& sd = mc.two_px.at(Strategy::Std);
  const double y0 = third_mean(sd.nees_yaw, 0), y1 = third_mean(sd.nees_yaw, 1), y2 = third_mean(sd.nees_yaw, 2);
  const std::size_t n = sd.nees_yaw.size();
  const double y_end = window_mean(sd.nees_yaw, n - n / 10, n);
  c.expect(y_end > 3.0, "Std yaw NEES at the end");
  c.expect(y2 > y1 && y1 > y0, "Std yaw NEES growing");
  c.note << " (" << mc.runs << " runs, " << fmt(mc.seconds / 60.0) << " min; Std yaw NEES by thirds " << fmt(y0)
         << "/" << fmt(y1) << "/" << fmt(y2) << ", last 10% " << fmt(y_end) << ";";
  for (Strategy s : {Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR}) {
    const McSummary& m = mc.two_px.at(s);
    const double o = third_mean(m.nees_ori, 2), p = third_mean(m.nees_pos, 2);
    c.expect(o >= 0.7 && o <= 1.5 && p >= 0.7 && p <= 1.5, std::string(to_string(s)) + " pose NEES");
    c.note << " " << to_string(s) << " ori/pos " << fmt(o) << "/" << fmt(p);
    c.expect(m.failed == 0, "diverged runs");
  }
  c.note << ")";
  report(6, "Monte-Carlo consistency", c);
}

void criterion7(const McData& mc) {
  Check c;
  // DTR only differs from DT through r1 = Q1^T r, which is ~0 at the
  // triangulated point; "<=" therefore allows a 1% tie band.
  constexpr double kTie = 1.01;
  const auto& m = mc.two_px;
  const auto ori = [&](Strategy s) { return m.at(s).avg_rmse_ori_deg; };
  const auto pos = [&](Strategy s) { return m.at(s).avg_rmse_pos_m; };
  for (const auto& [name, f] : std::vector<std::pair<std::string, std::function<double(Strategy)>>>{{"ori", ori},
                                                                                                    {"pos", pos}}) {
    const double dtr = f(Strategy::UsaDTR), dt = f(Strategy::UsaDT), it = f(Strategy::UsaIT), sd = f(Strategy::Std);
    c.expect(dtr <= kTie * dt, name + " DTR <= DT");
    c.expect(std::abs(dt - it) <= 0.05 * std::max(dt, it), name + " DT ~ IT");
    c.expect(dtr < sd && dt < sd && it < sd, name + " USA < Std");
    c.note << " " << name << " Std/IT/DT/DTR " << fmt(sd) << "/" << fmt(it) << "/" << fmt(dt) << "/" << fmt(dtr) << ";";
  }
  const McSummary& fej = mc.five_px.at(Strategy::Fej);
  const McSummary& dtr5 = mc.five_px.at(Strategy::UsaDTR);
  c.expect(fej.avg_rmse_ori_deg >= dtr5.avg_rmse_ori_deg, "5 px FEJ ori >= DTR");
  c.expect(fej.avg_rmse_pos_m >= dtr5.avg_rmse_pos_m, "5 px FEJ pos >= DTR");
  c.note << " 5 px FEJ/DTR ori " << fmt(fej.avg_rmse_ori_deg) << "/" << fmt(dtr5.avg_rmse_ori_deg) << " pos "
         << fmt(fej.avg_rmse_pos_m) << "/" << fmt(dtr5.avg_rmse_pos_m);
  report(7, "accuracy ordering", c);
}

// ---------------------------------------------------------------------------

double min_time(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void criterion8() {
  Check c;
  std::mt19937_64 g(108);
  // N = 15 + 6 n + 3 m; m doubles the size without touching the clone count
  auto scaling = [&](bool direct) {
    double t[2];
    for (int k = 0; k < 2; ++k) {
      const int m = k == 0 ? 8 : 43;  // N = 105 -> 210, the size of a full window
      const SwfState xm = rand_state(g, 11, m);
      const SwfState xp = corrected(g, xm, 0.05);
      const MatX p0 = rand_spd(g, xm.dim());
      MatX p = p0;
      if (direct) {
        const DirectTransform tr = make_direct(xm, xp);
        t[k] = min_time(200, [&] {
          p = p0;
          apply_direct(p, tr);
        });
      } else {
        const IndirectTransform tr = make_indirect(xm, xp);
        t[k] = min_time(200, [&] {
          p = p0;
          apply_indirect(p, tr);
        });
      }
      // subtract the copy
      t[k] -= min_time(200, [&] { p = p0; });
    }
    return t[1] / t[0];
  };
  const double rd = scaling(true), ri = scaling(false);
  c.expect(rd >= 3.0 && rd <= 5.0, "apply_direct ratio");
  c.expect(ri >= 3.0 && ri <= 5.0, "apply_indirect ratio");

  // per-frame cost at m = 40 SLAM features, n = 11 clones
  SimConfig sc;
  sc.duration = 12.0;
  Drive d(sc, 31);
  // rounds interleave the strategies so that load drift hits all of them alike
  std::map<Strategy, double> cost;
  const std::vector<Strategy> order{Strategy::Std, Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR};
  for (int round = 0; round < 9; ++round) {
    for (Strategy s : order) {
      const double secs = min_time(1, [&] {
        const InitialPrior p = d.prior(0);
        FilterConfig fc = d.filter_config(s, Mode::Hybrid);
        fc.max_slam = 40;
        fc.max_clones = 11;
        SlidingWindowFilter f(fc, p.x, p.p, 0.0);
        for (int j = 1; j <= d.frames(); ++j) f.process_frame(d.frame_imu(j), d.frame_obs(j));
      }) / d.frames();
      cost[s] = round == 0 ? secs : std::min(cost[s], secs);
    }
  }
  c.note << " (direct " << fmt(rd) << ", indirect " << fmt(ri) << "; per-frame ms Std " << fmt(1e3 * cost[Strategy::Std]);
  for (Strategy s : {Strategy::UsaIT, Strategy::UsaDT, Strategy::UsaDTR}) {
    const double over = cost[s] / cost[Strategy::Std] - 1.0;
    c.expect(over < 0.15, std::string(to_string(s)) + " overhead");
    c.note << ", " << to_string(s) << " " << fmt(1e3 * cost[s]) << " (" << fmt(100.0 * over) << "%)";
  }
  c.note << ")";
  report(8, "performance scaling", c);
}

void criterion9() {
  Check c;
  std::mt19937_64 g(109);
  double w_obs = 0.0;
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const Mat3 rot = rand_rot(g);
    const Vec3 pos = rand_vec(g, 3.0);
    const Extrinsics ext = rand_ext(g);
    std::uniform_real_distribution<double> u(-0.5, 0.5), z(1.0, 10.0);
    const double dz = z(g);
    const Vec3 pc(u(g) * dz, u(g) * dz, dz);
    const Vec3 pf = pos + rot * ext.rot.transpose() * (pc - ext.pos);
    const ObsJacobian j = observation_jacobian(rot, pos, ext, pf);
    Mat23 nt, np, nf;
    for (int col = 0; col < 3; ++col) {
      const Vec3 e = Vec3::Unit(col) * h;
      nt.col(col) = (project(rot * exp_so3(e), pos, ext, pf) - project(rot * exp_so3(-e), pos, ext, pf)) / (2 * h);
      np.col(col) = (project(rot, pos + e, ext, pf) - project(rot, pos - e, ext, pf)) / (2 * h);
      nf.col(col) = (project(rot, pos, ext, pf + e) - project(rot, pos, ext, pf - e)) / (2 * h);
    }
    w_obs = std::max({w_obs, (j.d_theta - nt).norm() / nt.norm(), (j.d_pos - np).norm() / np.norm(),
                      (j.d_feat - nf).norm() / nf.norm()});
  }
  double w_phi = 0.0;
  for (int k = 0; k < 20; ++k) {
    const ImuState s0 = rand_imu(g);
    const auto samples = rand_samples(g, 21, 0.005);
    const PropResult pr = propagate_imu(s0, samples, NoiseParams{});
    const SwfState x0 = wrap(s0), x1 = wrap(pr.imu_next);
    for (int col = 0; col < 9; ++col) {
      VecX dlt = VecX::Zero(15);
      dlt[col] = h;
      const VecX fp = boxminus(wrap(integrate_mean(boxplus(x0, dlt).imu, samples)), x1);
      const VecX fm = boxminus(wrap(integrate_mean(boxplus(x0, -dlt).imu, samples)), x1);
      const VecX fd = (fp - fm) / (2 * h);
      w_phi = std::max(w_phi, (pr.phi.col(col) - fd).norm() / fd.norm());
    }
  }
  c.expect(w_obs < 1e-5, "measurement Jacobians");
  c.expect(w_phi < 1e-4, "Phi columns");
  c.note << " (measurement " << fmt(w_obs) << ", Phi theta/p/v " << fmt(w_phi) << ")";
  report(9, "Jacobian finite-difference checks", c);
}

}  // namespace

int main() {
  int runs = 100;
  if (const char* e = std::getenv("SWF_ACCEPT_RUNS")) runs = std::max(2, std::atoi(e));

  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  const McData mc = run_mc(runs);
  criterion6(mc);
  criterion7(mc);
  criterion8();
  criterion9();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
