#include "swf/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

namespace swf {

EpochMetrics epoch_errors(const ImuState& est, const MatX& p, const ImuState& truth, double t) {
  if (p.rows() < 6 || p.cols() < 6) throw InvalidInput("epoch_errors: covariance too small");
  EpochMetrics m;
  m.t = t;
  const Vec3 dth = log_so3(est.rot.transpose() * truth.rot);
  const Vec3 dp = truth.pos - est.pos;
  m.ori_err_deg = dth.norm() * 180.0 / std::numbers::pi;
  m.pos_err_m = dp.norm();

  const Mat3 ptt = p.block<3, 3>(ErrorLayout::kTheta, ErrorLayout::kTheta);
  const Mat3 ppp = p.block<3, 3>(ErrorLayout::kPos, ErrorLayout::kPos);
  Eigen::LDLT<Mat3> lt(ptt);
  Eigen::LDLT<Mat3> lp(ppp);
  if (lt.info() != Eigen::Success || !lt.isPositive() || lt.vectorD().minCoeff() <= 0.0 ||
      lp.info() != Eigen::Success || !lp.isPositive() || lp.vectorD().minCoeff() <= 0.0) {
    m.valid = false;
    return m;
  }
  m.nees_ori = dth.dot(lt.solve(dth)) / 3.0;
  m.nees_pos = dp.dot(lp.solve(dp)) / 3.0;

  // Yaw: third component of the global error against its variance.
  const Vec3 dg = log_so3(truth.rot * est.rot.transpose());
  const Vec3 e3 = est.rot.transpose().col(2);  // R^T e3
  const double var = e3.dot(ptt * e3);
  if (!(var > 0.0)) {
    m.valid = false;
    return m;
  }
  m.nees_yaw = dg.z() * dg.z() / var;
  return m;
}

Histogram nees_histogram(const std::vector<double>& values, int bins, double hi) {
  if (bins <= 0 || !(hi > 0.0)) throw InvalidInput("nees_histogram: need bins > 0 and hi > 0");
  Histogram h;
  h.lo = 0.0;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double w = hi / bins;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) continue;
    const int b = std::min(bins - 1, static_cast<int>(v / w));
    ++h.counts[static_cast<std::size_t>(b)];
  }
  // NEES = X / 3 with X ~ chi2(3)
  boost::math::chi_squared dist(3.0);
  h.reference.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    const double a = boost::math::cdf(dist, 3.0 * b * w);
    const double c = b == bins - 1 ? 1.0 : boost::math::cdf(dist, 3.0 * (b + 1) * w);
    h.reference[static_cast<std::size_t>(b)] = c - a;
  }
  return h;
}

McSummary aggregate(const std::vector<RunMetrics>& runs, int failed) {
  McSummary s;
  s.runs = static_cast<int>(runs.size());
  s.failed = failed;
  if (runs.empty()) return s;
  std::size_t len = runs.front().size();
  for (const auto& r : runs) len = std::min(len, r.size());

  std::vector<double> all_ori;
  for (std::size_t k = 0; k < len; ++k) {
    double se_o = 0.0, se_p = 0.0, no = 0.0, np = 0.0, ny = 0.0;
    int valid = 0;
    for (const auto& r : runs) {
      const EpochMetrics& m = r[k];
      se_o += m.ori_err_deg * m.ori_err_deg;
      se_p += m.pos_err_m * m.pos_err_m;
      if (m.valid) {
        no += m.nees_ori;
        np += m.nees_pos;
        ny += m.nees_yaw;
        all_ori.push_back(m.nees_ori);
        ++valid;
      }
    }
    const double n = static_cast<double>(runs.size());
    s.t.push_back(runs.front()[k].t);
    s.rmse_ori_deg.push_back(std::sqrt(se_o / n));
    s.rmse_pos_m.push_back(std::sqrt(se_p / n));
    const double nv = valid > 0 ? static_cast<double>(valid) : std::numeric_limits<double>::quiet_NaN();
    s.nees_ori.push_back(no / nv);
    s.nees_pos.push_back(np / nv);
    s.nees_yaw.push_back(ny / nv);
  }
  s.avg_rmse_ori_deg = window_mean(s.rmse_ori_deg, 0, len);
  s.avg_rmse_pos_m = window_mean(s.rmse_pos_m, 0, len);
  s.avg_nees_ori = window_mean(s.nees_ori, 0, len);
  s.avg_nees_pos = window_mean(s.nees_pos, 0, len);
  s.avg_nees_yaw = window_mean(s.nees_yaw, 0, len);
  s.hist_ori = nees_histogram(all_ori);
  return s;
}

double improvement(double rmse_std, double rmse_other) {
  if (rmse_std == 0.0) return 0.0;
  return (rmse_std - rmse_other) / rmse_std;
}

double window_mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  to = std::min(to, v.size());
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = from; i < to; ++i) {
    if (std::isfinite(v[i])) {
      sum += v[i];
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace swf
