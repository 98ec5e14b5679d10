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
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "snrmask/error.hpp"
#include "snrmask/fft.hpp"
#include "snrmask/types.hpp"

namespace snrmask {

/// Temporal cepstrum smoothing parameters. Quefrency indices refer to a
/// 256-point cepstrum at 8 kHz (one index = 0.125 ms).
struct TcsConfig {
  double xi_min_ml = 1e-3;
  double alpha_env = 0.2;
  double alpha_rest = 0.96;
  double alpha_pitch = 0.2;
  int env_cutoff = 20;      // q < 2.5 ms
  int pitch_lo = 16;        // 2 ms
  int pitch_hi = 128;       // 16 ms
  int pitch_halfwidth = 1;
  double voicing_ratio = 5.0;
  double euler_gamma = 0.5772156649015329;
  int frame_len = 256;

  void validate() const {
    auto in_unit = [](double a) { return a >= 0.0 && a < 1.0; };
    detail::require(in_unit(alpha_env) && in_unit(alpha_rest) &&
                        in_unit(alpha_pitch),
                    ErrorKind::kInvalidArgument,
                    "smoothing constants must be in [0,1)");
    detail::require(xi_min_ml > 0.0, ErrorKind::kInvalidArgument,
                    "xi_min_ml must be positive");
    detail::require(frame_len >= 4 && frame_len % 2 == 0,
                    ErrorKind::kInvalidArgument, "bad cepstrum length");
    detail::require(env_cutoff >= 0 && env_cutoff <= frame_len / 2 &&
                        pitch_lo >= 1 && pitch_lo <= pitch_hi &&
                        pitch_hi <= frame_len / 2 && pitch_halfwidth >= 0,
                    ErrorKind::kInvalidArgument, "bad quefrency ranges");
  }
};

struct TcsState {
  std::vector<double> ceps_prev;
  bool initialized = false;
};

/// Limited maximum-likelihood speech PSD: noise * max(|Y|^2/noise - 1, floor).
inline RealVector ml_speech_psd(const RealVector& noisy_power,
                                const RealVector& noise_psd,
                                double xi_min_ml = 1e-3) {
  detail::require(noisy_power.size() == noise_psd.size(),
                  ErrorKind::kInvalidArgument, "bin count mismatch");
  detail::require((noise_psd.array() > 0.0).all(),
                  ErrorKind::kInvalidArgument, "noise PSD must be positive");
  RealVector out(noisy_power.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double post = noisy_power[k] / noise_psd[k];
    out[k] = noise_psd[k] * std::max(post - 1.0, xi_min_ml);
  }
  return out;
}

/// Real cepstrum (length 2*(K-1)) of a one-sided log spectrum.
inline std::vector<double> cepstrum_from_log(const RealVector& log_spec) {
  const auto n = static_cast<std::size_t>(2 * (log_spec.size() - 1));
  std::vector<std::complex<double>> spec(log_spec.size());
  for (Eigen::Index k = 0; k < log_spec.size(); ++k) spec[k] = log_spec[k];
  std::vector<double> ceps(n);
  cached_fft(n).inverse(spec, ceps);
  return ceps;
}

/// One-sided log spectrum of a symmetric real cepstrum.
inline RealVector log_from_cepstrum(std::span<const double> ceps) {
  const std::size_t n = ceps.size();
  std::vector<std::complex<double>> spec(n / 2 + 1);
  cached_fft(n).forward(ceps, spec);
  RealVector out(static_cast<Eigen::Index>(spec.size()));
  for (std::size_t k = 0; k < spec.size(); ++k) out[k] = spec[k].real();
  return out;
}

/// Cepstral pitch peak in [pitch_lo, pitch_hi]; empty when the frame is
/// judged unvoiced (peak not above voicing_ratio times the median magnitude
/// in the search range). Ties resolve to the lower quefrency.
inline std::optional<int> detect_pitch_peak(std::span<const double> cepstrum,
                                            const TcsConfig& cfg = {}) {
  if (cepstrum.size() <= static_cast<std::size_t>(cfg.pitch_hi)) return {};
  int best = cfg.pitch_lo;
  for (int q = cfg.pitch_lo + 1; q <= cfg.pitch_hi; ++q) {
    if (cepstrum[q] > cepstrum[best]) best = q;
  }
  std::vector<double> mags;
  mags.reserve(cfg.pitch_hi - cfg.pitch_lo + 1);
  for (int q = cfg.pitch_lo; q <= cfg.pitch_hi; ++q) {
    mags.push_back(std::abs(cepstrum[q]));
  }
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  const double median = *mid;
  if (!(cepstrum[best] > cfg.voicing_ratio * median) || cepstrum[best] <= 0.0) {
    return {};
  }
  return best;
}

/// Speech PSD estimator based on selective recursive smoothing of the
/// cepstrum of the limited ML estimate. Envelope quefrencies and the pitch
/// peak are smoothed lightly, everything else heavily; the result is
/// bias-corrected by exp(gamma/2).
class SpeechPsdEstimator {
 public:
  explicit SpeechPsdEstimator(TcsConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
  }

  const TcsConfig& config() const { return cfg_; }
  const TcsState& state() const { return state_; }
  void reset() { state_ = {}; }

  /// pitch_hint, when given, replaces the detected pitch quefrency.
  RealVector estimate(const RealVector& noisy_power,
                      const RealVector& noise_psd,
                      std::optional<int> pitch_hint = std::nullopt) {
    detail::require(noisy_power.size() == cfg_.frame_len / 2 + 1,
                    ErrorKind::kInvalidArgument, "bin count mismatch");
    const RealVector ml = ml_speech_psd(noisy_power, noise_psd, cfg_.xi_min_ml);
    const std::vector<double> ceps_ml = cepstrum_from_log(ml.array().log());
    const int n = cfg_.frame_len;

    std::vector<double> smoothed(ceps_ml);
    if (state_.initialized) {
      const std::optional<int> pitch =
          pitch_hint ? pitch_hint : detect_pitch_peak(ceps_ml, cfg_);
      for (int q = 0; q <= n / 2; ++q) {
        double a = q < cfg_.env_cutoff ? cfg_.alpha_env : cfg_.alpha_rest;
        if (pitch && std::abs(q - *pitch) <= cfg_.pitch_halfwidth) {
          a = cfg_.alpha_pitch;
        }
        smoothed[q] = (1.0 - a) * ceps_ml[q] + a * state_.ceps_prev[q];
        if (q > 0 && q < n / 2) smoothed[n - q] = smoothed[q];
      }
    }
    state_.ceps_prev = smoothed;
    state_.initialized = true;

    RealVector log_psd = log_from_cepstrum(smoothed);
    return (log_psd.array() + 0.5 * cfg_.euler_gamma).exp();
  }

 private:
  TcsConfig cfg_;
  TcsState state_;
};

}  // namespace snrmask
