#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swf/alignment.h"
#include "swf/observability.h"
#include "swf/propagation.h"
#include "swf/vision.h"

namespace swf {

enum class Strategy { Std, Fej, UsaIT, UsaDT, UsaDTR };
enum class Mode { Msckf, Slam, Hybrid };
enum class InitVariant { Separate, Batch };

const char* to_string(Strategy s);
const char* to_string(Mode m);
const char* to_string(InitVariant v);
/// Accepts std, fej, usa-it, usa-dt, usa-dtr (case-insensitive). Throws InvalidInput.
Strategy parse_strategy(const std::string& s);
Mode parse_mode(const std::string& s);
InitVariant parse_init_variant(const std::string& s);

inline bool is_usa(Strategy s) { return s == Strategy::UsaIT || s == Strategy::UsaDT || s == Strategy::UsaDTR; }

struct FilterConfig {
  Mode mode = Mode::Hybrid;
  Strategy strategy = Strategy::Std;
  InitVariant init_variant = InitVariant::Separate;
  int max_clones = 11;  // window capacity, newest clone included
  int max_slam = 40;
  int max_msckf = 40;
  int min_obs = 3;
  NoiseParams imu_noise;
  double pixel_sigma = 2.0 / 458.0;  // normalized units
  Extrinsics ext;
  double chi2_level = 0.95;
  bool gate = true;
  double max_init_cond = 1e8;
};

struct FeatureTrack {
  struct Entry {
    double stamp;
    Vec2 uv;
  };
  int id = -1;
  std::vector<Entry> obs;
  bool seen = false;        // observed in the newest frame
  bool msckf_only = false;  // initialization failed or demoted
};

struct RunStats {
  int msckf_used = 0;
  int msckf_gated = 0;
  int msckf_failed = 0;
  int slam_gated = 0;
  int init_ok = 0;
  int init_demoted = 0;
  int init_failed = 0;
  int usa_skipped = 0;
};

struct FilterEstimate {
  SwfState x;
  MatX p;
};

class SlidingWindowFilter {
 public:
  /// x0 may carry SLAM features; p0 must cover its full layout.
  SlidingWindowFilter(FilterConfig cfg, SwfState x0, MatX p0, double t0);

  void enable_audit(AuditConfig cfg = {});
  Auditor* auditor() { return auditor_.get(); }
  const Auditor* auditor() const { return auditor_.get(); }

  const FilterConfig& config() const { return cfg_; }
  const FilterEstimate& estimate() const { return est_; }
  const SwfState& state() const { return est_.x; }
  const MatX& cov() const { return est_.p; }
  double time() const { return t_; }
  const RunStats& stats() const { return stats_; }
  const std::map<int, FeatureTrack>& tracks() const { return tracks_; }

  // Pipeline steps; each keeps the covariance, auditor and layout in sync.

  /// Samples must start at time() and be strictly increasing.
  void predict(std::span<const ImuSample> samples);
  void augment_clone();
  /// Observations of in-state features at the newest clone.
  void slam_update(const std::vector<FrameObs>& obs);
  void msckf_update(const std::vector<FeatureTrack>& tracks);
  /// Returns true when the feature entered the state.
  bool delayed_init(FeatureTrack& track);
  void marginalize(bool oldest_clone, const std::vector<int>& feature_ids);

  /// predict -> augment -> bookkeeping -> msckf -> slam -> init -> marginalize.
  void process_frame(std::span<const ImuSample> imu, const std::vector<FrameObs>& obs);

  /// Plain EKF correction (Joseph form) with rows supported on few columns;
  /// no alignment and no audit.
  void ekf_update(const MatX& h, const VecX& r, const VecX& rdiag);

  /// Strategy hook after a correction from x_minus to the current estimate.
  void align(const SwfState& x_minus);

 private:
  std::vector<CloneLin> clone_lin() const;
  std::vector<Obs> to_obs(const FeatureTrack& t) const;
  bool passes_gate(const MatX& h, const VecX& r, const VecX& rdiag) const;
  void update_and_hook(const MatX& h, const VecX& r, const VecX& rdiag, const std::string& label);
  void apply_transform(const SwfState& x_from, const SwfState& x_to);
  void record(const std::string& step);

  FilterConfig cfg_;
  FilterEstimate est_;
  double t_ = 0.0;
  std::unique_ptr<Auditor> auditor_;
  std::map<int, FeatureTrack> tracks_;
  RunStats stats_;
};

/// Joseph-form update of a covariance with a column-sparse H; returns K r.
VecX joseph_update(MatX& p, const MatX& h, const VecX& r, const VecX& rdiag);

/// 95% (or `level`) chi-square quantile, cached by dof.
double chi2_quantile(int dof, double level = 0.95);

/// QR-compresses stacked rows with isotropic noise down to the width of
/// their column support. Returns false when no compression applies.
bool compress_rows(MatX& h, VecX& r);

}  // namespace swf
