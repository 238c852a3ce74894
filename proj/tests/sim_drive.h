#pragma once

#include "swf/experiment.h"
#include "swf/filter.h"
#include "swf/simulator.h"

namespace swf::testing {

/// Simulated data fed frame by frame into a filter.
struct Drive {
  SimConfig sim;
  std::uint64_t seed = 1;
  ImuStream imu;
  std::vector<Vec3> landmarks;

  Drive(SimConfig cfg, std::uint64_t s) : sim(std::move(cfg)), seed(s) {
    imu = gen_imu(sim, seed);
    landmarks = gen_landmarks(sim, seed);
  }

  int frames() const { return (static_cast<int>(imu.samples.size()) - 1) / sim.imu_per_frame(); }
  std::span<const ImuSample> frame_imu(int j) const {
    const int ipf = sim.imu_per_frame();
    return {imu.samples.data() + static_cast<std::size_t>((j - 1) * ipf), static_cast<std::size_t>(ipf + 1)};
  }
  int sample_index(int j) const { return j * sim.imu_per_frame(); }
  double frame_t(int j) const { return imu.samples[static_cast<std::size_t>(sample_index(j))].stamp; }
  std::vector<FrameObs> frame_obs(int j) const { return gen_frame(sim, frame_t(j), landmarks, seed); }
  ImuState truth(int j) const { return truth_imu(sim, imu, sample_index(j)); }

  FilterConfig filter_config(Strategy s, Mode m) const {
    FilterConfig fc;
    fc.strategy = s;
    fc.mode = m;
    fc.ext = sim.ext;
    fc.imu_noise = sim.noise_scale > 0.0 ? sim.noise.scaled(sim.noise_scale) : sim.noise;
    fc.pixel_sigma = sim.pixel_sigma_px > 0.0 ? sim.pixel_sigma() : 1.0 / sim.focal;
    return fc;
  }

  /// Prior at t = 0 with `nfeat` visible landmarks in the state.
  InitialPrior prior(int nfeat, bool perturb = true) const {
    const auto feats = nfeat > 0 ? initial_features(sim, landmarks, nfeat) : std::vector<std::pair<int, Vec3>>{};
    PriorSigmas sig;
    InitialPrior p = make_prior(truth_imu(sim, imu, 0), feats, sig, seed);
    if (!perturb) {
      p.x.imu = truth_imu(sim, imu, 0);
      for (std::size_t k = 0; k < feats.size(); ++k) p.x.features[k].pos = feats[k].second;
    }
    return p;
  }
};

}  // namespace swf::testing
