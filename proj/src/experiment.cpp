#include "swf/experiment.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

namespace swf {

namespace {

namespace fs = std::filesystem;

Vec3 read_vec3(const YAML::Node& n, const char* key) {
  if (!n.IsSequence() || n.size() != 3) throw InvalidInput(std::string("config: ") + key + " must be a 3-vector");
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (const YAML::Node n = node[key]) out = n.as<T>();
}

void read(const YAML::Node& node, const char* key, Vec3& out) {
  if (const YAML::Node n = node[key]) out = read_vec3(n, key);
}

FilterConfig filter_config(const ExperimentSpec& spec, Strategy s) {
  FilterConfig fc = spec.filter;
  fc.strategy = s;
  fc.ext = spec.sim.ext;
  // a noiseless simulation still needs a nondegenerate filter model
  fc.imu_noise = spec.sim.noise_scale > 0.0 ? spec.sim.noise.scaled(spec.sim.noise_scale) : spec.sim.noise;
  fc.pixel_sigma = spec.sim.pixel_sigma_px > 0.0 ? spec.sim.pixel_sigma() : 1.0 / spec.sim.focal;
  return fc;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_audit_jsonl(const std::string& path, const std::vector<AuditRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write " + path);
  for (const AuditRecord& r : recs) {
    nlohmann::ordered_json j;
    j["t"] = r.t;
    j["step"] = r.step;
    j["status"] = to_string(r.status.status);
    j["dim"] = r.status.dim;
    j["angle"] = r.status.angle;
    if (r.inconclusive) j["inconclusive"] = true;
    f << j.dump() << '\n';
  }
}

bool is_update(const std::string& step) { return step == "msckf" || step == "slam" || step == "init"; }

int workers_for(const ExperimentSpec& spec, std::size_t jobs) {
  int w = spec.workers > 0 ? spec.workers : static_cast<int>(std::thread::hardware_concurrency());
  w = std::max(1, w);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(w), std::max<std::size_t>(jobs, 1)));
}

void check_spec(const ExperimentSpec& spec) {
  if (spec.runs < 1) throw InvalidInput("runs must be >= 1");
  if (spec.strategies.empty()) throw InvalidInput("no strategies requested");
  if (spec.max_failed < 0) throw InvalidInput("max_failed must be >= 0");
  spec.sim.validate();
}

}  // namespace

void load_config(const std::string& path, ExperimentSpec& spec) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw InvalidInput("config " + path + ": " + e.what());
  }
  try {
    if (const YAML::Node n = root["mode"]) spec.filter.mode = parse_mode(n.as<std::string>());
    if (const YAML::Node n = root["init_variant"]) spec.filter.init_variant = parse_init_variant(n.as<std::string>());
    if (const YAML::Node n = root["strategies"]) {
      spec.strategies.clear();
      if (n.IsSequence()) {
        for (const auto& s : n) spec.strategies.push_back(parse_strategy(s.as<std::string>()));
      } else {
        spec.strategies.push_back(parse_strategy(n.as<std::string>()));
      }
    }
    if (const YAML::Node n = root["strategy"]) spec.strategies = {parse_strategy(n.as<std::string>())};
    read(root, "runs", spec.runs);
    read(root, "seed", spec.seed);
    read(root, "out", spec.out_dir);
    read(root, "audit", spec.audit);
    read(root, "workers", spec.workers);
    read(root, "max_failed", spec.max_failed);
    read(root, "divergence_m", spec.divergence_m);
    read(root, "initial_features", spec.initial_features);

    if (const YAML::Node s = root["sim"]) {
      SimConfig& c = spec.sim;
      read(s, "duration", c.duration);
      read(s, "imu_hz", c.imu_hz);
      read(s, "cam_hz", c.cam_hz);
      read(s, "center", c.center);
      read(s, "amp", c.amp);
      read(s, "freq", c.freq);
      read(s, "phase", c.phase);
      read(s, "euler_offset", c.euler_offset);
      read(s, "euler_amp", c.euler_amp);
      read(s, "euler_freq", c.euler_freq);
      read(s, "euler_phase", c.euler_phase);
      read(s, "noise_scale", c.noise_scale);
      read(s, "sigma_g", c.noise.sigma_g);
      read(s, "sigma_a", c.noise.sigma_a);
      read(s, "sigma_wg", c.noise.sigma_wg);
      read(s, "sigma_wa", c.noise.sigma_wa);
      read(s, "bg0", c.bg0);
      read(s, "ba0", c.ba0);
      read(s, "bias_walk", c.bias_walk);
      read(s, "focal", c.focal);
      read(s, "width", c.width);
      read(s, "height", c.height);
      read(s, "pixel_sigma_px", c.pixel_sigma_px);
      read(s, "num_landmarks", c.num_landmarks);
      read(s, "min_range", c.min_range);
      read(s, "max_range", c.max_range);
    }
    if (const YAML::Node f = root["filter"]) {
      FilterConfig& c = spec.filter;
      read(f, "max_clones", c.max_clones);
      read(f, "max_slam", c.max_slam);
      read(f, "max_msckf", c.max_msckf);
      read(f, "min_obs", c.min_obs);
      read(f, "chi2_level", c.chi2_level);
      read(f, "gate", c.gate);
      read(f, "max_init_cond", c.max_init_cond);
    }
    if (const YAML::Node p = root["prior"]) {
      PriorSigmas& c = spec.prior;
      read(p, "rot", c.rot);
      read(p, "pos", c.pos);
      read(p, "vel", c.vel);
      read(p, "bg", c.bg);
      read(p, "ba", c.ba);
      read(p, "feat", c.feat);
    }
  } catch (const YAML::Exception& e) {
    throw InvalidInput("config " + path + ": " + e.what());
  }
}

std::vector<std::pair<int, Vec3>> initial_features(const SimConfig& sim, const std::vector<Vec3>& landmarks,
                                                   int count) {
  const TruthSample tr = truth_at(sim, 0.0);
  const double xmax = 0.5 * sim.width / sim.focal;
  const double ymax = 0.5 * sim.height / sim.focal;
  std::vector<std::pair<double, int>> vis;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Vec3 pc = to_camera(tr.rot, tr.pos, sim.ext, landmarks[i]);
    if (!(pc.z() > kMinDepth)) continue;
    if (std::abs(pc.x() / pc.z()) > xmax || std::abs(pc.y() / pc.z()) > ymax) continue;
    vis.emplace_back(pc.z(), static_cast<int>(i));
  }
  std::sort(vis.begin(), vis.end());
  std::vector<std::pair<int, Vec3>> out;
  for (const auto& [d, id] : vis) {
    if (static_cast<int>(out.size()) >= count) break;
    out.emplace_back(id, landmarks[static_cast<std::size_t>(id)]);
  }
  return out;
}

RunResult run_single(const ExperimentSpec& spec, Strategy strategy, std::uint64_t seed, bool audit) {
  RunResult res;
  res.strategy = strategy;
  try {
    const SimConfig& sim = spec.sim;
    sim.validate();
    const ImuStream imu = gen_imu(sim, seed);
    const std::vector<Vec3> lms = gen_landmarks(sim, seed);
    const ImuState truth0 = truth_imu(sim, imu, 0);

    std::vector<std::pair<int, Vec3>> feats;
    if (spec.initial_features > 0 && spec.filter.mode != Mode::Msckf)
      feats = initial_features(sim, lms, std::min(spec.initial_features, spec.filter.max_slam));
    const InitialPrior prior = make_prior(truth0, feats, spec.prior, seed);

    SlidingWindowFilter filter(filter_config(spec, strategy), prior.x, prior.p, 0.0);
    if (audit) filter.enable_audit();
    res.metrics.push_back(epoch_errors(filter.state().imu, filter.cov(), truth0, 0.0));

    const int ipf = sim.imu_per_frame();
    const int n = static_cast<int>(imu.samples.size());
    using clock = std::chrono::steady_clock;
    for (int j = 1; j * ipf < n; ++j) {
      const std::span<const ImuSample> samples(imu.samples.data() + static_cast<std::size_t>((j - 1) * ipf),
                                               static_cast<std::size_t>(ipf + 1));
      const int k = j * ipf;
      const double t = imu.samples[static_cast<std::size_t>(k)].stamp;
      const std::vector<FrameObs> obs = gen_frame(sim, t, lms, seed);

      const auto t0 = clock::now();
      filter.process_frame(samples, obs);
      res.seconds += std::chrono::duration<double>(clock::now() - t0).count();
      ++res.frames;

      const ImuState tr = truth_imu(sim, imu, k);
      const double err = (filter.state().imu.pos - tr.pos).norm();
      if (!std::isfinite(err) || err > spec.divergence_m) {
        res.failed = true;
        res.error = "diverged at t=" + fmt(t);
        break;
      }
      res.metrics.push_back(epoch_errors(filter.state().imu, filter.cov(), tr, t));
    }
    res.stats = filter.stats();
    if (filter.auditor()) res.audit = filter.auditor()->records();
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

ExperimentResult run_monte_carlo(const ExperimentSpec& spec) {
  check_spec(spec);
  const std::size_t jobs = spec.strategies.size() * static_cast<std::size_t>(spec.runs);
  ExperimentResult out;
  out.runs.resize(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      const Strategy s = spec.strategies[i / static_cast<std::size_t>(spec.runs)];
      const int run = static_cast<int>(i % static_cast<std::size_t>(spec.runs));
      RunResult r = run_single(spec, s, spec.seed + static_cast<std::uint64_t>(run), spec.audit);
      r.run = run;
      out.runs[i] = std::move(r);
    }
  };
  const int nw = workers_for(spec, jobs);
  std::vector<std::thread> pool;
  for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const Strategy s : spec.strategies) {
    std::vector<RunMetrics> ok;
    int failed = 0;
    for (const RunResult& r : out.runs) {
      if (r.strategy != s) continue;
      if (r.failed) {
        ++failed;
      } else {
        ok.push_back(r.metrics);
      }
    }
    out.summary[s] = aggregate(ok, failed);
  }
  return out;
}

int run_experiment(const ExperimentSpec& spec, std::ostream& out) {
  ExperimentResult res;
  try {
    res = run_monte_carlo(spec);
    fs::create_directories(spec.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  const fs::path dir(spec.out_dir);

  int failed_total = 0;
  std::map<Strategy, std::array<int, 3>> tallies;
  for (const Strategy s : spec.strategies) {
    const std::string name = to_string(s);
    std::ofstream per(dir / ("runs_" + name + ".csv"));
    per << "run,t,ori_err_deg,pos_err_m,ori_nees,pos_nees,yaw_nees,valid\n";
    for (const RunResult& r : res.runs) {
      if (r.strategy != s) continue;
      if (r.failed) {
        ++failed_total;
        std::cerr << name << " run " << r.run << " failed: " << r.error << '\n';
      }
      for (const EpochMetrics& m : r.metrics) {
        per << r.run << ',' << fmt(m.t) << ',' << fmt(m.ori_err_deg) << ',' << fmt(m.pos_err_m) << ','
            << fmt(m.nees_ori) << ',' << fmt(m.nees_pos) << ',' << fmt(m.nees_yaw) << ',' << (m.valid ? 1 : 0)
            << '\n';
      }
      if (spec.audit) {
        write_audit_jsonl((dir / ("audit_" + name + "_run" + std::to_string(r.run) + ".jsonl")).string(), r.audit);
        auto& tl = tallies[s];
        for (const AuditRecord& a : r.audit) {
          if (is_update(a.step)) ++tl[static_cast<std::size_t>(a.status.status)];
        }
      }
    }

    const McSummary& sm = res.summary.at(s);
    std::ofstream agg(dir / ("aggregate_" + name + ".csv"));
    agg << "t,ori_rmse_deg,pos_rmse_m,ori_nees,pos_nees,yaw_nees\n";
    for (std::size_t k = 0; k < sm.t.size(); ++k) {
      agg << fmt(sm.t[k]) << ',' << fmt(sm.rmse_ori_deg[k]) << ',' << fmt(sm.rmse_pos_m[k]) << ','
          << fmt(sm.nees_ori[k]) << ',' << fmt(sm.nees_pos[k]) << ',' << fmt(sm.nees_yaw[k]) << '\n';
    }

    std::ofstream hist(dir / ("hist_" + name + ".csv"));
    hist << "bin_lo,bin_hi,count,fraction,reference\n";
    const Histogram& h = sm.hist_ori;
    int total = 0;
    for (int c : h.counts) total += c;
    const double w = h.counts.empty() ? 0.0 : (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      hist << fmt(h.lo + w * static_cast<double>(b)) << ',' << fmt(h.lo + w * static_cast<double>(b + 1)) << ','
           << h.counts[b] << ',' << fmt(total > 0 ? h.counts[b] / static_cast<double>(total) : 0.0) << ','
           << fmt(h.reference[b]) << '\n';
    }
  }

  const McSummary* std_sum = nullptr;
  if (auto it = res.summary.find(Strategy::Std); it != res.summary.end()) std_sum = &it->second;

  std::ofstream sum(dir / "summary.csv");
  sum << "strategy,runs,failed,ori_rmse_deg,pos_rmse_m,ori_nees,pos_nees,yaw_nees,ori_improvement,pos_improvement\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %5s %6s %12s %10s %9s %9s %9s %9s %9s\n", "strategy", "runs", "failed",
                "ori_rmse_deg", "pos_rmse_m", "ori_nees", "pos_nees", "yaw_nees", "ori_impr", "pos_impr");
  out << "mode " << to_string(spec.filter.mode) << ", " << spec.runs << " runs, seed " << spec.seed << '\n' << line;
  for (const Strategy s : spec.strategies) {
    const McSummary& sm = res.summary.at(s);
    const double io = std_sum ? improvement(std_sum->avg_rmse_ori_deg, sm.avg_rmse_ori_deg) : std::nan("");
    const double ip = std_sum ? improvement(std_sum->avg_rmse_pos_m, sm.avg_rmse_pos_m) : std::nan("");
    sum << to_string(s) << ',' << sm.runs << ',' << sm.failed << ',' << fmt(sm.avg_rmse_ori_deg) << ','
        << fmt(sm.avg_rmse_pos_m) << ',' << fmt(sm.avg_nees_ori) << ',' << fmt(sm.avg_nees_pos) << ','
        << fmt(sm.avg_nees_yaw) << ',' << fmt(io) << ',' << fmt(ip) << '\n';
    std::snprintf(line, sizeof line, "%-8s %5d %6d %12.5f %10.5f %9.3f %9.3f %9.3f %8.1f%% %8.1f%%\n", to_string(s),
                  sm.runs, sm.failed, sm.avg_rmse_ori_deg, sm.avg_rmse_pos_m, sm.avg_nees_ori, sm.avg_nees_pos,
                  sm.avg_nees_yaw, 100.0 * io, 100.0 * ip);
    out << line;
  }
  if (spec.audit) {
    out << "post-update audit statuses (aligned/misaligned/mismatched):\n";
    for (const Strategy s : spec.strategies) {
      const auto& t = tallies[s];
      out << "  " << to_string(s) << ": " << t[0] << '/' << t[1] << '/' << t[2] << '\n';
    }
  }
  return failed_total <= spec.max_failed ? 0 : 1;
}

int run_audit_demo(const ExperimentSpec& spec_in, std::ostream& out) {
  ExperimentSpec spec = spec_in;
  spec.audit = true;
  try {
    check_spec(spec);
    fs::create_directories(spec.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  int failed = 0;
  for (const Strategy s : spec.strategies) {
    const RunResult r = run_single(spec, s, spec.seed, true);
    const std::string name = to_string(s);
    out << "== " << name << " (" << to_string(spec.filter.mode) << ", " << r.frames << " frames)\n";
    if (r.failed) {
      ++failed;
      out << "  run failed: " << r.error << '\n';
    }
    write_audit_jsonl((fs::path(spec.out_dir) / ("audit_" + name + ".jsonl")).string(), r.audit);

    char line[160];
    bool usa_ok = true, seen_mis = false, seen_mm_after = false;
    double max_angle = 0.0;
    for (const AuditRecord& a : r.audit) {
      std::snprintf(line, sizeof line, "  t=%7.3f  %-11s %-10s dim=%d angle=%.3e%s\n", a.t, a.step.c_str(),
                    to_string(a.status.status), a.status.dim, a.status.angle, a.inconclusive ? " (inconclusive)" : "");
      out << line;
      if (is_update(a.step) && a.status.status != Status::Aligned) usa_ok = false;
      if (a.status.status == Status::Misaligned) seen_mis = true;
      if (seen_mis && a.status.status == Status::Mismatched) seen_mm_after = true;
      if (a.status.dim == 4) max_angle = std::max(max_angle, a.status.angle);
    }
    if (s == Strategy::Std) {
      out << "  verdict: Aligned->Misaligned->Mismatched " << (seen_mm_after ? "observed" : "NOT observed") << '\n';
    } else if (is_usa(s)) {
      out << "  verdict: post-update statuses " << (usa_ok ? "all Aligned" : "NOT all Aligned") << '\n';
    }
    if (spec.filter.mode == Mode::Msckf) {
      std::snprintf(line, sizeof line, "  max angle to top-two-block basis: %.3e\n", max_angle);
      out << line;
    }
  }
  return failed <= spec.max_failed ? 0 : 1;
}

}  // namespace swf
