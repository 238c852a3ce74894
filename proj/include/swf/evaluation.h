#pragma once

#include <vector>

#include "swf/state.h"

namespace swf {

struct EpochMetrics {
  double t = 0.0;
  double ori_err_deg = 0.0;
  double pos_err_m = 0.0;
  double nees_ori = 0.0;
  double nees_pos = 0.0;
  double nees_yaw = 0.0;
  bool valid = true;  // false when a covariance block was singular
};

using RunMetrics = std::vector<EpochMetrics>;

/// Pose errors of the current IMU block. `p` is the full covariance; only its
/// leading 6x6 (theta, p) block is used. NEES values are divided by the dof.
EpochMetrics epoch_errors(const ImuState& est, const MatX& p, const ImuState& truth, double t);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<int> counts;
  std::vector<double> reference;  // expected fraction per bin for chi2(3)/3
};

/// NEES values into `bins` equal bins over [0, hi]; values beyond hi fall in
/// the last bin.
Histogram nees_histogram(const std::vector<double>& values, int bins = 40, double hi = 4.0);

struct McSummary {
  int runs = 0;
  int failed = 0;
  std::vector<double> t;
  std::vector<double> rmse_ori_deg;
  std::vector<double> rmse_pos_m;
  std::vector<double> nees_ori;
  std::vector<double> nees_pos;
  std::vector<double> nees_yaw;
  double avg_rmse_ori_deg = 0.0;
  double avg_rmse_pos_m = 0.0;
  double avg_nees_ori = 0.0;
  double avg_nees_pos = 0.0;
  double avg_nees_yaw = 0.0;
  Histogram hist_ori;
};

/// Per-epoch RMSE across runs then time-averaged; NEES averaged per epoch.
/// Runs are aligned by epoch index and truncated to the shortest run.
McSummary aggregate(const std::vector<RunMetrics>& runs, int failed = 0);

/// (rmse_std - rmse_other) / rmse_std
double improvement(double rmse_std, double rmse_other);

/// Mean of v over [from, to).
double window_mean(const std::vector<double>& v, std::size_t from, std::size_t to);

}  // namespace swf
