// Copyright 2026 The snrmask Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "snrmask/error.hpp"
#include "snrmask/types.hpp"

namespace snrmask {

struct NoiseTrackerConfig {
  double xi_opt = 0.031622776601683794;  // -15 dB
  double alpha_spp = 0.8;
  double spp_ceiling = 0.99;
  // Recursive smoothing of the SPP used to detect stagnation.
  double stagnation_smoothing = 0.9;
  // Lower PSD bound, relative to the mean initial noise PSD.
  double floor_rel = 1e-12;

  void validate() const {
    detail::require(alpha_spp > 0.0 && alpha_spp < 1.0,
                    ErrorKind::kInvalidArgument, "alpha_spp must be in (0,1)");
    detail::require(spp_ceiling > 0.0 && spp_ceiling <= 1.0,
                    ErrorKind::kInvalidArgument,
                    "spp_ceiling must be in (0,1]");
    detail::require(xi_opt > 0.0, ErrorKind::kInvalidArgument,
                    "xi_opt must be positive");
    detail::require(stagnation_smoothing >= 0.0 && stagnation_smoothing < 1.0,
                    ErrorKind::kInvalidArgument,
                    "stagnation_smoothing must be in [0,1)");
  }
};

struct NoiseTrackerState {
  RealVector noise_psd_prev;
  RealVector smoothed_spp;
  double floor = 0.0;
};

struct NoiseEstimate {
  RealVector noise_psd;
  RealVector spp;
};

/// Speech-presence-probability driven noise PSD tracker.
///
/// Each frame: a posteriori SPP from the previous noise PSD with a fixed
/// optimal SNR, soft noise periodogram (1-P)|Y|^2 + P*prev, then first-order
/// recursive smoothing. Bins whose smoothed SPP is stuck above the ceiling
/// get their instantaneous SPP capped so the estimate keeps adapting.
class NoiseTracker {
 public:
  explicit NoiseTracker(NoiseTrackerConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
  }

  const NoiseTrackerConfig& config() const { return cfg_; }
  const NoiseTrackerState& state() const { return state_; }
  bool initialized() const { return state_.noise_psd_prev.size() > 0; }

  /// Initial noise PSD from the per-bin mean of noise-only frames (M x K).
  void init(const RealMatrix& noisy_power_frames) {
    detail::require(noisy_power_frames.rows() >= 1 &&
                        noisy_power_frames.cols() >= 1,
                    ErrorKind::kInvalidArgument,
                    "noise tracker init needs at least one frame");
    detail::require((noisy_power_frames.array() >= 0.0).all() &&
                        noisy_power_frames.allFinite(),
                    ErrorKind::kInvalidArgument,
                    "noise tracker init needs nonnegative finite power");
    RealVector mean = noisy_power_frames.colwise().mean().transpose();
    double floor = cfg_.floor_rel * mean.mean();
    if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
    state_.floor = floor;
    state_.noise_psd_prev = mean.cwiseMax(floor);
    state_.smoothed_spp = RealVector::Constant(mean.size(), 0.5);
  }

  /// Probability of speech presence for one frame, including the stagnation
  /// cap that update() would apply. Does not modify the state.
  RealVector spp(const RealVector& noisy_power) const {
    check_frame(noisy_power);
    RealVector p = raw_spp(noisy_power);
    RealVector smoothed = smoothed_after(p);
    cap(p, smoothed);
    return p;
  }

  /// Processes one frame and returns the updated noise PSD and the SPP used.
  NoiseEstimate update(const RealVector& noisy_power) {
    check_frame(noisy_power);
    RealVector p = raw_spp(noisy_power);
    state_.smoothed_spp = smoothed_after(p);
    cap(p, state_.smoothed_spp);
    RealVector psd = apply_spp(noisy_power, p);
    return {std::move(psd), std::move(p)};
  }

  /// Soft noise periodogram and recursive smoothing for a given SPP.
  /// Advances the noise PSD state only.
  RealVector apply_spp(const RealVector& noisy_power, const RealVector& p) {
    check_frame(noisy_power);
    detail::require(p.size() == noisy_power.size(),
                    ErrorKind::kInvalidArgument, "spp size mismatch");
    const auto& prev = state_.noise_psd_prev;
    RealVector periodogram =
        (1.0 - p.array()) * noisy_power.array() + p.array() * prev.array();
    RealVector psd =
        ((1.0 - cfg_.alpha_spp) * periodogram.array() +
         cfg_.alpha_spp * prev.array())
            .matrix()
            .cwiseMax(state_.floor);
    state_.noise_psd_prev = psd;
    return psd;
  }

 private:
  void check_frame(const RealVector& noisy_power) const {
    detail::require(initialized(), ErrorKind::kInvalidState,
                    "noise tracker not initialized");
    detail::require(noisy_power.size() == state_.noise_psd_prev.size(),
                    ErrorKind::kInvalidArgument, "bin count mismatch");
    detail::require((noisy_power.array() >= 0.0).all() &&
                        noisy_power.allFinite(),
                    ErrorKind::kInvalidArgument,
                    "noisy power must be nonnegative and finite");
  }

  RealVector raw_spp(const RealVector& noisy_power) const {
    const double xi = cfg_.xi_opt;
    const double slope = xi / (1.0 + xi);
    RealVector p(noisy_power.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double post = noisy_power[k] / state_.noise_psd_prev[k];
      p[k] = 1.0 / (1.0 + (1.0 + xi) * std::exp(-post * slope));
    }
    return p;
  }

  RealVector smoothed_after(const RealVector& p) const {
    const double a = cfg_.stagnation_smoothing;
    return a * state_.smoothed_spp + (1.0 - a) * p;
  }

  void cap(RealVector& p, const RealVector& smoothed) const {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (smoothed[k] > cfg_.spp_ceiling) p[k] = std::min(p[k], cfg_.spp_ceiling);
    }
  }

  NoiseTrackerConfig cfg_;
  NoiseTrackerState state_;
};

}  // namespace snrmask
