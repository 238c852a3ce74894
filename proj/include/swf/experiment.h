#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "swf/evaluation.h"
#include "swf/filter.h"
#include "swf/simulator.h"

namespace swf {

struct ExperimentSpec {
  std::vector<Strategy> strategies{Strategy::Std};
  int runs = 1;
  std::uint64_t seed = 1;
  SimConfig sim;
  FilterConfig filter;  // mode, init variant and caps; strategy is overridden per run
  PriorSigmas prior;
  std::string out_dir = "results";
  bool audit = false;
  int workers = 0;     // 0: hardware concurrency
  int max_failed = 0;  // runs allowed to fail before the exit status turns non-zero
  double divergence_m = 1e3;
  int initial_features = 0;  // SLAM features placed in the prior at t = 0
};

/// Reads a YAML file into spec (keys absent from the file keep their value).
void load_config(const std::string& path, ExperimentSpec& spec);

struct RunResult {
  Strategy strategy = Strategy::Std;
  int run = 0;
  bool failed = false;
  std::string error;
  RunMetrics metrics;
  RunStats stats;
  std::vector<AuditRecord> audit;
  double seconds = 0.0;  // wall time of the filter only
  int frames = 0;
};

/// Simulates and filters one run with seed `seed`.
RunResult run_single(const ExperimentSpec& spec, Strategy strategy, std::uint64_t seed, bool audit);

struct ExperimentResult {
  std::vector<RunResult> runs;  // strategy-major, then run index
  std::map<Strategy, McSummary> summary;
};

/// All (strategy, run) pairs on a worker pool; seeds are spec.seed + run.
ExperimentResult run_monte_carlo(const ExperimentSpec& spec);

/// Runs the Monte-Carlo batch and writes CSV / JSON-lines outputs plus a
/// summary table to `out`. Returns the process exit status.
int run_experiment(const ExperimentSpec& spec, std::ostream& out);

/// Short audited SLAM-mode run per strategy with features in the prior;
/// prints the status timeline. Returns the process exit status.
int run_audit_demo(const ExperimentSpec& spec, std::ostream& out);

/// Landmarks visible at t = 0, nearest first, up to `count`.
std::vector<std::pair<int, Vec3>> initial_features(const SimConfig& sim, const std::vector<Vec3>& landmarks,
                                                   int count);

}  // namespace swf
